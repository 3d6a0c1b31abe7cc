#include "ghar/service.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <semaphore>
#include <thread>
#include <vector>

#include <httplib.h>

namespace ghar {

using json = nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

struct Stored {
  bool done = false;
  std::string line;  // serialized trajectory once done
  EpisodeStatus status = EpisodeStatus::kOk;
  ErrorCode error_code = ErrorCode::kOk;
  ojson result;
};

std::string error_body(ErrorCode code, std::string_view message) {
  return ojson{{"error", to_string(code)}, {"message", message}}.dump();
}

int status_for(const Stored& s) {
  if (s.status == EpisodeStatus::kOk) return 200;
  if (s.error_code == ErrorCode::kProvider || s.error_code == ErrorCode::kRetrieval) return 502;
  return 500;
}

}  // namespace

struct Service::Impl {
  const Engine& engine;
  httplib::Server server;
  std::counting_semaphore<1024> slots;
  std::mutex mu;
  std::map<std::string, Stored> episodes;
  std::vector<std::thread> background;
  std::mutex write_mu;
  std::thread listener;
  std::atomic<int> bound_port{0};
  std::atomic<std::size_t> running{0};

  explicit Impl(const Engine& e)
      : engine(e),
        slots(static_cast<std::ptrdiff_t>(std::min<std::size_t>(e.config().service.max_concurrent_episodes, 1024))) {
    std::size_t threads = e.config().service.max_concurrent_episodes + 8;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    routes();
  }

  void persist(const std::string& line) {
    const auto& path = engine.config().paths.trajectories;
    if (path.empty()) return;
    std::lock_guard lock(write_mu);
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) {
      warn("cannot append to trajectory file '" + path + "'");
      return;
    }
    out << line << '\n';
  }

  void execute(const std::string& id, const EpisodeRequest& request) {
    slots.acquire();
    ++running;
    Stored s;
    s.done = true;
    try {
      Trajectory tr = engine.run(request);
      s.line = serialize_trajectory(tr);
      s.status = tr.status;
      s.error_code = tr.error_code;
      s.result = episode_result_json(tr);
    } catch (const Error& e) {
      s.status = EpisodeStatus::kFailed;
      s.error_code = e.code();
      s.result = ojson{{"episode_id", id}, {"status", "failed"}, {"error_code", to_string(e.code())}, {"error", e.what()}};
      s.line = s.result.dump();
    } catch (const std::exception& e) {
      s.status = EpisodeStatus::kFailed;
      s.error_code = ErrorCode::kInternal;
      s.result = ojson{{"episode_id", id}, {"status", "failed"}, {"error_code", "internal_error"}, {"error", e.what()}};
      s.line = s.result.dump();
    }
    --running;
    slots.release();
    persist(s.line);
    std::lock_guard lock(mu);
    episodes[id] = std::move(s);
  }

  void post_episode(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      RequestError err(std::vector<FieldError>{{"body", "not valid JSON"}});
      res.status = 400;
      res.set_content(err.to_json().dump(), kJson);
      return;
    }
    EpisodeRequest request;
    std::string id;
    try {
      request = engine.parse_request(body);
      id = engine.episode_id(request);
    } catch (const RequestError& e) {
      res.status = 400;
      res.set_content(e.to_json().dump(), kJson);
      return;
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(error_body(e.code(), e.what()), kJson);
      return;
    }

    {
      std::lock_guard lock(mu);
      auto [it, inserted] = episodes.try_emplace(id);
      if (!inserted) {
        if (it->second.done) {
          res.status = status_for(it->second);
          res.set_content(it->second.result.dump(), kJson);
        } else {
          res.status = 202;
          res.set_content(ojson{{"episode_id", id}, {"status", "running"}}.dump(), kJson);
        }
        return;
      }
      if (!engine.local()) {
        background.emplace_back([this, id, request] { execute(id, request); });
        res.status = 202;
        res.set_content(ojson{{"episode_id", id}, {"status", "running"}}.dump(), kJson);
        return;
      }
    }

    execute(id, request);
    std::lock_guard lock(mu);
    const Stored& s = episodes.at(id);
    res.status = status_for(s);
    res.set_content(s.result.dump(), kJson);
  }

  void get_episode(const httplib::Request& req, httplib::Response& res) {
    std::string id = req.matches[1];
    std::lock_guard lock(mu);
    auto it = episodes.find(id);
    if (it == episodes.end()) {
      res.status = 404;
      res.set_content(error_body(ErrorCode::kNotFound, "unknown episode '" + id + "'"), kJson);
      return;
    }
    if (!it->second.done) {
      res.status = 202;
      res.set_content(ojson{{"episode_id", id}, {"status", "running"}}.dump(), kJson);
      return;
    }
    res.status = 200;
    res.set_content(it->second.line, kJson);
  }

  void routes() {
    server.Post("/v1/episodes", [this](const httplib::Request& req, httplib::Response& res) { post_episode(req, res); });
    server.Get(R"(/v1/episodes/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { get_episode(req, res); });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      ojson health = engine.health_json();
      std::size_t stored;
      {
        std::lock_guard lock(mu);
        stored = episodes.size();
      }
      health["episodes"] = {{"running", running.load()}, {"stored", stored}};
      res.set_content(health.dump(), kJson);
    });
    server.Get("/v1/catalog", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(engine.catalog().to_json(), kJson);
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "unhandled error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(error_body(ErrorCode::kInternal, message), kJson);
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      res.set_content(error_body(res.status == 404 ? ErrorCode::kNotFound : ErrorCode::kInvalidArgument,
                                 httplib::status_message(res.status)),
                      kJson);
    });
  }

  int bind() {
    const auto& svc = engine.config().service;
    int port = svc.port;
    if (port == 0) {
      port = server.bind_to_any_port(svc.host);
    } else if (!server.bind_to_port(svc.host, port)) {
      port = -1;
    }
    if (port < 0) {
      throw Error(ErrorCode::kIo, "cannot bind " + svc.host + ":" + std::to_string(svc.port));
    }
    bound_port = port;
    return port;
  }

  void shutdown() {
    server.stop();
    if (listener.joinable()) listener.join();
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(mu);
      pending.swap(background);
    }
    for (auto& t : pending) t.join();
  }
};

Service::Service(const Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}

Service::~Service() { impl_->shutdown(); }

int Service::start() {
  int port = impl_->bind();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

int Service::port() const { return impl_->bound_port; }

}  // namespace ghar
