// ghar command-line front end. Talks to the engine only through ghar.h.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ghar/ghar.h"

namespace {

using json = nlohmann::ordered_json;

struct CString {
  char* p = nullptr;
  ~CString() { ghar_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct EngineHandle {
  ghar_engine* p = nullptr;
  ~EngineHandle() { ghar_engine_destroy(p); }
};

int report(ghar_status status) {
  if (status != GHAR_OK) std::cerr << ghar_last_error() << '\n';
  return ghar_status_exit_code(status);
}

int usage_error(const std::string& message) {
  std::cerr << json{{"error", "invalid_argument"}, {"message", message}}.dump() << '\n';
  return 1;
}

// Flags that override config keys. Unset flags leave the config alone.
struct Overrides {
  std::optional<std::string> kg, indexes, trajectories, references, cohort;
  std::optional<long long> k, i, max_meta_paths, n;
  std::optional<double> kappa;
  std::optional<int> l;
  std::optional<double> eta, alpha;
  std::optional<std::string> normalization, rank_mode;
  std::optional<double> gamma, lambda, epsilon;
  std::optional<std::string> critic_target;
  std::optional<std::string> provider_mode, mock_script, low_mock_script, llm_url, llm_model, api_key_env;
  std::optional<std::string> embedding_mode, embedding_url, embedding_model, embedding_path;
  std::optional<long long> embedding_dim;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<long long> max_concurrent;
  std::optional<unsigned long long> seed;
  std::optional<long long> parallelism;

  void add_to(CLI::App* app) {
    app->add_option("--kg", kg, "KG triple file (paths.kg)");
    app->add_option("--indexes", indexes, "index file (paths.indexes)");
    app->add_option("--trajectories", trajectories, "trajectory file (paths.trajectories)");
    app->add_option("--references", references, "reference trajectories (paths.references)");
    app->add_option("--cohort", cohort, "cohort file (paths.cohort)");
    app->add_option("-K,--rewrites", k, "query rewrites K");
    app->add_option("-I,--max-iterations", i, "iteration cap I");
    app->add_option("--max-meta-paths", max_meta_paths, "meta-paths per rag step");
    app->add_option("-N,--top-n", n, "retrieved nodes/edges per partition N");
    app->add_option("--kappa", kappa, "readmission window in days");
    app->add_option("-L,--reason-length", l, "expected reasoning length L");
    app->add_option("--eta", eta, "outcome reward weight");
    app->add_option("--alpha", alpha, "ranking floor/margin");
    app->add_option("--normalization", normalization, "none|clamp|running_zscore");
    app->add_option("--rank-mode", rank_mode, "literal|margin");
    app->add_option("--gamma", gamma, "discount");
    app->add_option("--lambda", lambda, "GAE lambda");
    app->add_option("--epsilon", epsilon, "PPO clip range");
    app->add_option("--critic-target", critic_target, "reward_to_go|immediate");
    app->add_option("--provider-mode", provider_mode, "mock|http");
    app->add_option("--mock-script", mock_script, "mock script for the top agent");
    app->add_option("--low-mock-script", low_mock_script, "mock script for the low agent");
    app->add_option("--llm-url", llm_url, "chat completions URL");
    app->add_option("--llm-model", llm_model, "chat model name");
    app->add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    app->add_option("--embedding-mode", embedding_mode, "mock|http|precomputed");
    app->add_option("--embedding-dim", embedding_dim, "embedding dimension");
    app->add_option("--embedding-url", embedding_url, "embeddings URL");
    app->add_option("--embedding-model", embedding_model, "embedding model name");
    app->add_option("--embedding-path", embedding_path, "precomputed embeddings file");
    app->add_option("--host", host, "service host");
    app->add_option("--port", port, "service port");
    app->add_option("--max-concurrent", max_concurrent, "concurrent service episodes");
    app->add_option("--seed", seed, "episode seed");
    app->add_option("--parallelism", parallelism, "concurrent episodes/partitions in batch runs");
  }

  json patch() const {
    json j = json::object();
    auto set = [&](const char* section, const char* key, const auto& v) {
      if (!v) return;
      if (section) {
        j[section][key] = *v;
      } else {
        j[key] = *v;
      }
    };
    set("paths", "kg", kg);
    set("paths", "indexes", indexes);
    set("paths", "trajectories", trajectories);
    set("paths", "references", references);
    set("paths", "cohort", cohort);
    set("agent", "K", k);
    set("agent", "I", i);
    set("agent", "max_meta_paths", max_meta_paths);
    set("agent", "N", n);
    set("agent", "kappa", kappa);
    set("reward", "L", l);
    set("reward", "eta", eta);
    set("reward", "alpha", alpha);
    set("reward", "normalization", normalization);
    set("reward", "rank_mode", rank_mode);
    set("rl", "gamma", gamma);
    set("rl", "lambda", lambda);
    set("rl", "epsilon", epsilon);
    set("rl", "critic_target", critic_target);
    set("providers", "mode", provider_mode);
    if (mock_script) j["providers"]["llm"]["mock_script"] = *mock_script;
    if (llm_url) j["providers"]["llm"]["url"] = *llm_url;
    if (llm_model) j["providers"]["llm"]["model"] = *llm_model;
    if (api_key_env) j["providers"]["llm"]["api_key_env"] = *api_key_env;
    if (low_mock_script) {
      // A low-agent script implies a separate low endpoint with default fields.
      j["providers"]["low_llm"] = json{{"mock_script", *low_mock_script},
                                       {"url", ""},
                                       {"model", ""},
                                       {"api_key_env", ""},
                                       {"timeout_seconds", 120}};
    }
    if (embedding_mode) j["providers"]["embedding"]["mode"] = *embedding_mode;
    if (embedding_dim) j["providers"]["embedding"]["dim"] = *embedding_dim;
    if (embedding_url) j["providers"]["embedding"]["url"] = *embedding_url;
    if (embedding_model) j["providers"]["embedding"]["model"] = *embedding_model;
    if (embedding_path) j["providers"]["embedding"]["path"] = *embedding_path;
    set("service", "host", host);
    set("service", "port", port);
    set("service", "max_concurrent_episodes", max_concurrent);
    set(nullptr, "seed", seed);
    set(nullptr, "parallelism", parallelism);
    return j;
  }
};

ghar_status open_engine(const std::optional<std::string>& config, const Overrides& o, unsigned flags,
                        EngineHandle& out) {
  std::string patch = o.patch().dump();
  return ghar_engine_create(config ? config->c_str() : nullptr, patch.c_str(), flags, &out.p);
}

std::string config_path_value(const EngineHandle& e, const char* section, const char* key) {
  CString text;
  if (ghar_engine_config_json(e.p, &text.p) != GHAR_OK) return {};
  return json::parse(text.str())[section][key].get<std::string>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ghar: hierarchical agentic retrieval over a knowledge graph for clinical prediction"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(ghar_version()));
  std::optional<std::string> config;
  app.add_option("--config", config, "config JSON (default: $GHAR_CONFIG)");

  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "validate a TSV triple file and export its meta-path catalog");
  std::optional<std::string> ingest_kg, catalog_out;
  ingest->add_option("--kg", ingest_kg, "TSV triple file (default: paths.kg)");
  ingest->add_option("--catalog", catalog_out, "write the catalog JSON here");

  auto* index = app.add_subcommand("index", "build partition indexes");
  std::vector<std::string> meta_paths;
  std::optional<std::string> index_out;
  index->add_option("--meta-path", meta_paths, "meta-path index or \"(h, r, t)\"; repeatable (default: all)");
  index->add_option("--out", index_out, "index file (default: paths.indexes)");
  o.add_to(index);

  auto* run = app.add_subcommand("run", "run episodes over a cohort and write trajectories");
  std::string task;
  std::size_t limit = 0;
  std::optional<std::string> run_out;
  run->add_option("--task", task, "DEC|READ|LOS")->required();
  run->add_option("--limit", limit, "only the first N patients");
  run->add_option("--out", run_out, "trajectory file (default: paths.trajectories)");
  o.add_to(run);

  auto* eval = app.add_subcommand("eval", "compute metrics from trajectories");
  std::string eval_in;
  std::optional<std::string> eval_task, eval_split, eval_gold, eval_out;
  eval->add_option("trajectories", eval_in, "trajectory file")->required();
  eval->add_option("--task", eval_task, "DEC|READ|LOS (default: first trajectory's task)");
  eval->add_option("--split", eval_split, "train|validation|test patient group");
  eval->add_option("--gold", eval_gold, "cohort file overriding gold labels");
  eval->add_option("--out", eval_out, "also write the report here");

  auto* score = app.add_subcommand("score", "compute advantages, returns and losses per trajectory");
  std::string score_in, score_out;
  score->add_option("trajectories", score_in, "trajectory file")->required();
  score->add_option("--out", score_out, "score export file")->required();

  auto* replay = app.add_subcommand("replay", "pretty-print one episode");
  std::string replay_in;
  std::optional<std::string> episode;
  replay->add_option("trajectories", replay_in, "trajectory file")->required();
  replay->add_option("--episode", episode, "episode id (default: first)");

  auto* serve = app.add_subcommand("serve", "serve the HTTP API");
  o.add_to(serve);

  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");
  o.add_to(config_cmd);

  auto* gen_cohort = app.add_subcommand("gen-cohort", "write a synthetic cohort");
  std::string cohort_out;
  std::optional<std::string> spec_json;
  std::optional<unsigned long long> cohort_seed;
  std::optional<long long> n_patients;
  gen_cohort->add_option("--out", cohort_out, "cohort file")->required();
  gen_cohort->add_option("--spec", spec_json, "cohort spec as JSON");
  gen_cohort->add_option("--seed", cohort_seed, "generator seed");
  gen_cohort->add_option("--patients", n_patients, "number of patients");

  auto* gen_kg = app.add_subcommand("gen-kg", "write a synthetic KG as TSV");
  std::string kg_out;
  std::uint64_t kg_seed = 7;
  std::size_t kg_nodes = 1000;
  gen_kg->add_option("--out", kg_out, "TSV file")->required();
  gen_kg->add_option("--seed", kg_seed, "generator seed");
  gen_kg->add_option("--nodes", kg_nodes, "node count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage_error(e.what());
  }

  if (*ingest) {
    std::string kg_path;
    if (ingest_kg) {
      kg_path = *ingest_kg;
    } else {
      EngineHandle e;
      if (auto s = open_engine(config, o, GHAR_ENGINE_NO_INDEXES, e); s != GHAR_OK) return report(s);
      kg_path = config_path_value(e, "paths", "kg");
    }
    if (kg_path.empty()) return usage_error("no KG file: pass --kg or set paths.kg");
    CString summary;
    auto s = ghar_ingest(kg_path.c_str(), catalog_out ? catalog_out->c_str() : nullptr, &summary.p);
    if (s == GHAR_OK) std::cout << summary.str() << '\n';
    return report(s);
  }

  if (*index) {
    EngineHandle e;
    if (auto s = open_engine(config, o, GHAR_ENGINE_NO_INDEXES, e); s != GHAR_OK) return report(s);
    std::string out = index_out ? *index_out : config_path_value(e, "paths", "indexes");
    if (out.empty()) return usage_error("no index file: pass --out or set paths.indexes");
    std::vector<const char*> names;
    for (const auto& m : meta_paths) names.push_back(m.c_str());
    auto s = ghar_engine_build_indexes(e.p, names.data(), names.size(), out.c_str());
    if (s == GHAR_OK) {
      CString health;
      if (ghar_engine_health_json(e.p, &health.p) == GHAR_OK) {
        std::cout << json::parse(health.str())["indexes"].dump() << '\n';
      }
    }
    return report(s);
  }

  if (*run) {
    EngineHandle e;
    if (auto s = open_engine(config, o, 0, e); s != GHAR_OK) return report(s);
    std::string out = run_out ? *run_out : config_path_value(e, "paths", "trajectories");
    if (out.empty()) return usage_error("no trajectory file: pass --out or set paths.trajectories");
    return report(ghar_engine_run_cohort(e.p, nullptr, task.c_str(), limit, out.c_str()));
  }

  if (*eval) {
    CString metrics;
    auto s = ghar_eval(eval_in.c_str(), eval_task ? eval_task->c_str() : nullptr,
                       eval_split ? eval_split->c_str() : nullptr, eval_gold ? eval_gold->c_str() : nullptr,
                       &metrics.p);
    if (s == GHAR_OK) {
      std::string pretty = json::parse(metrics.str()).dump(2);
      std::cout << pretty << '\n';
      if (eval_out) {
        std::FILE* f = std::fopen(eval_out->c_str(), "wb");
        if (!f) {
          std::cerr << json{{"error", "io_error"}, {"message", "cannot write '" + *eval_out + "'"}}.dump() << '\n';
          return 1;
        }
        std::fputs((pretty + "\n").c_str(), f);
        std::fclose(f);
      }
    }
    return report(s);
  }

  if (*score) {
    std::size_t scored = 0;
    auto s = ghar_score(score_in.c_str(), score_out.c_str(), &scored);
    if (s == GHAR_OK) std::cout << json{{"scored", scored}}.dump() << '\n';
    return report(s);
  }

  if (*replay) {
    CString text;
    auto s = ghar_replay(replay_in.c_str(), episode ? episode->c_str() : nullptr, &text.p);
    if (s == GHAR_OK) std::cout << text.str();
    return report(s);
  }

  if (*serve) {
    EngineHandle e;
    if (auto s = open_engine(config, o, 0, e); s != GHAR_OK) return report(s);
    CString cfg;
    if (ghar_engine_config_json(e.p, &cfg.p) == GHAR_OK) {
      auto c = json::parse(cfg.str());
      std::cerr << "[ghar] serving on " << c["service"]["host"].get<std::string>() << ':'
                << c["service"]["port"].get<int>() << '\n';
    }
    return report(ghar_engine_serve(e.p));
  }

  if (*config_cmd) {
    EngineHandle e;
    if (auto s = open_engine(config, o, GHAR_ENGINE_NO_INDEXES, e); s != GHAR_OK) return report(s);
    CString cfg;
    auto s = ghar_engine_config_json(e.p, &cfg.p);
    if (s == GHAR_OK) std::cout << cfg.str() << '\n';
    return report(s);
  }

  if (*gen_cohort) {
    json spec = json::object();
    if (spec_json) {
      spec = json::parse(*spec_json, nullptr, false);
      if (spec.is_discarded() || !spec.is_object()) return usage_error("--spec must be a JSON object");
    }
    if (cohort_seed) spec["seed"] = *cohort_seed;
    if (n_patients) spec["n_patients"] = *n_patients;
    return report(ghar_gen_cohort(spec.dump().c_str(), cohort_out.c_str()));
  }

  if (*gen_kg) return report(ghar_gen_kg(kg_seed, kg_nodes, kg_out.c_str()));

  return usage_error("no subcommand");
}
