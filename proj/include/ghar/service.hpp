#pragma once

#include <memory>
#include <string>

#include "ghar/engine.hpp"

namespace ghar {

/// HTTP front end over an Engine.
///
///   POST /v1/episodes       EpisodeRequest -> 200 episode result (local
///                           providers) or 202 {"episode_id", "status"}
///   GET  /v1/episodes/{id}  full trajectory, byte-identical to the CLI line
///   GET  /v1/health         build info and index checksums
///   GET  /v1/catalog        meta-path catalog
///
/// At most config.service.max_concurrent_episodes episodes run at once; the
/// listener pool is larger so health checks are answered while episodes run.
/// Finished trajectories are appended to paths.trajectories when set.
class Service {
 public:
  explicit Service(const Engine& engine);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds host:port (port 0 picks a free port) and serves on a background
  /// thread. Returns the bound port. Throws kIo when binding fails.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ghar
