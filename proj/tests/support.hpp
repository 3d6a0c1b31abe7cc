#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "ghar/kg_store.hpp"
#include "ghar/llm.hpp"
#include "ghar/serialize.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(GHAR_FIXTURES) + "/" + name; }

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ghar_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline ghar::KnowledgeGraph toy_kg() { return ghar::ingest_triples_file(fixture("toy_kg.tsv")); }

inline ghar::MockLlmProvider script(const std::string& name) {
  return ghar::MockLlmProvider::from_file(fixture(name));
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command, capturing stdout (stderr is redirected by the caller if wanted).
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace testing
