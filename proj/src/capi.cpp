#include "ghar/ghar.h"

#include <cstring>
#include <fstream>
#include <set>

#include "ghar/engine.hpp"
#include "ghar/service.hpp"

using ghar::ErrorCode;
using json = nlohmann::json;

struct ghar_engine {
  std::unique_ptr<ghar::Engine> engine;
};

namespace {

thread_local std::string g_last_error;

ghar_status to_status(ErrorCode code) { return static_cast<ghar_status>(static_cast<int>(code)); }

ghar_status fail(ErrorCode code, std::string_view message) {
  g_last_error = ghar::ojson{{"error", ghar::to_string(code)}, {"message", message}}.dump();
  return to_status(code);
}

template <typename F>
ghar_status guarded(F&& f) {
  try {
    return f();
  } catch (const ghar::RequestError& e) {
    g_last_error = e.to_json().dump();
    return to_status(e.code());
  } catch (const ghar::ParseError& e) {
    auto j = ghar::ojson{{"error", ghar::to_string(e.code())}, {"message", e.what()}};
    if (e.line()) j["line"] = e.line();
    g_last_error = j.dump();
    return to_status(e.code());
  } catch (const ghar::Error& e) {
    return fail(e.code(), e.what());
  } catch (const json::exception& e) {
    return fail(ErrorCode::kParse, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::kInternal, e.what());
  } catch (...) {
    return fail(ErrorCode::kInternal, "unknown error");
  }
}

char* dup(std::string_view s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

ghar_status null_arg(const char* name) {
  return fail(ErrorCode::kInvalidArgument, std::string(name) + " must not be NULL");
}

json parse_json_arg(const char* text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ghar::Error(ErrorCode::kParse, std::string(what) + " is not valid JSON");
  return j;
}

}  // namespace

extern "C" {

GHAR_API const char* ghar_version(void) { return GHAR_VERSION; }

GHAR_API const char* ghar_status_name(ghar_status status) {
  int v = static_cast<int>(status);
  if (v < 0 || v > static_cast<int>(ErrorCode::kInternal)) return "unknown_status";
  return ghar::to_string(static_cast<ErrorCode>(v)).data();
}

GHAR_API int ghar_status_exit_code(ghar_status status) {
  switch (status) {
    case GHAR_OK:
      return 0;
    case GHAR_PROVIDER_ERROR:
    case GHAR_RETRIEVAL_ERROR:
    case GHAR_INTERNAL_ERROR:
      return 2;
    default:
      return 1;
  }
}

GHAR_API const char* ghar_last_error(void) { return g_last_error.c_str(); }

GHAR_API void ghar_string_free(char* s) { std::free(s); }

GHAR_API ghar_status ghar_engine_create(const char* config_path, const char* overrides_json, unsigned flags,
                                        ghar_engine** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    json overrides = overrides_json ? parse_json_arg(overrides_json, "overrides") : json::object();
    std::optional<std::string> path;
    if (config_path) path = config_path;
    auto config = ghar::load_config(path, overrides);
    auto handle = std::make_unique<ghar_engine>();
    handle->engine = std::make_unique<ghar::Engine>(std::move(config), (flags & GHAR_ENGINE_NO_INDEXES) == 0);
    *out = handle.release();
    return GHAR_OK;
  });
}

GHAR_API void ghar_engine_destroy(ghar_engine* engine) { delete engine; }

GHAR_API ghar_status ghar_engine_config_json(const ghar_engine* engine, char** out) {
  if (!engine || !out) return null_arg("engine/out");
  return guarded([&] {
    *out = dup(ghar::to_json(engine->engine->config()).dump(2));
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_catalog_json(const ghar_engine* engine, char** out) {
  if (!engine || !out) return null_arg("engine/out");
  return guarded([&] {
    *out = dup(engine->engine->catalog().to_json());
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_health_json(const ghar_engine* engine, char** out) {
  if (!engine || !out) return null_arg("engine/out");
  return guarded([&] {
    *out = dup(engine->engine->health_json().dump());
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_build_indexes(ghar_engine* engine, const char* const* meta_paths, size_t count,
                                               const char* out_path) {
  if (!engine || !out_path) return null_arg("engine/out_path");
  if (count && !meta_paths) return null_arg("meta_paths");
  return guarded([&] {
    if (engine->engine->kg().edges().empty()) {
      throw ghar::Error(ErrorCode::kConfig, "no knowledge graph loaded (set paths.kg)");
    }
    std::vector<std::string> names(meta_paths, meta_paths + count);
    engine->engine->build_indexes(names);
    engine->engine->save_indexes(out_path);
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_run_episode(const ghar_engine* engine, const char* request_json,
                                             char** trajectory_json) {
  if (!engine || !request_json || !trajectory_json) return null_arg("engine/request_json/trajectory_json");
  return guarded([&] {
    auto request = engine->engine->parse_request(parse_json_arg(request_json, "request"));
    auto tr = engine->engine->run(request);
    *trajectory_json = dup(ghar::serialize_trajectory(tr));
    if (tr.status == ghar::EpisodeStatus::kFailed) return fail(tr.error_code, tr.error);
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_run_cohort(const ghar_engine* engine, const char* cohort_path, const char* task,
                                            size_t limit, const char* out_path) {
  if (!engine || !task || !out_path) return null_arg("engine/task/out_path");
  return guarded([&] {
    const auto& e = *engine->engine;
    std::vector<ghar::CohortEntry> loaded;
    const std::vector<ghar::CohortEntry>* cohort = &e.cohort();
    if (cohort_path) {
      loaded = ghar::read_cohort(cohort_path);
      cohort = &loaded;
    }
    if (cohort->empty()) throw ghar::Error(ErrorCode::kInvalidArgument, "cohort is empty (pass a cohort file)");
    auto kind = ghar::parse_task_kind(task);
    std::size_t n = limit ? std::min(limit, cohort->size()) : cohort->size();
    std::vector<ghar::EpisodeRequest> requests;
    requests.reserve(n);
    for (std::size_t i = 0; i < n; ++i) requests.push_back(e.request_for((*cohort)[i], kind));

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ghar::Error(ErrorCode::kIo, std::string("cannot write '") + out_path + "'");
    std::size_t failed = 0;
    ErrorCode first = ErrorCode::kOk;
    e.run_all(requests, [&](const ghar::Trajectory& tr) {
      out << ghar::serialize_trajectory(tr) << '\n';
      if (tr.status == ghar::EpisodeStatus::kFailed && failed++ == 0) first = tr.error_code;
    });
    out.close();
    if (!out) throw ghar::Error(ErrorCode::kIo, std::string("write failed for '") + out_path + "'");
    if (failed) {
      return fail(first, std::to_string(failed) + " of " + std::to_string(n) + " episodes failed");
    }
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_engine_serve(const ghar_engine* engine) {
  if (!engine) return null_arg("engine");
  return guarded([&] {
    ghar::Service service(*engine->engine);
    service.run();
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_ingest(const char* tsv_path, const char* catalog_path, char** summary_json) {
  if (!tsv_path || !summary_json) return null_arg("tsv_path/summary_json");
  return guarded([&] {
    auto kg = ghar::ingest_triples_file(tsv_path);
    auto catalog = ghar::catalog_meta_paths(kg);
    if (catalog_path) ghar::write_file(catalog_path, catalog.to_json() + "\n");
    ghar::ojson summary{{"nodes", kg.nodes().size()},
                        {"edges", kg.edges().size()},
                        {"node_types", kg.node_types()},
                        {"edge_types", kg.edge_types()},
                        {"meta_paths", catalog.count()}};
    *summary_json = dup(summary.dump());
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_eval(const char* trajectories_path, const char* task, const char* split,
                               const char* gold_cohort_path, char** metrics_json) {
  if (!trajectories_path || !metrics_json) return null_arg("trajectories_path/metrics_json");
  return guarded([&] {
    auto trajectories = ghar::read_trajectories(trajectories_path);
    ghar::EvalOptions options;
    if (task) options.task = ghar::parse_task_kind(task);
    if (split) options.split = ghar::parse_data_split(split);
    std::vector<ghar::CohortEntry> gold;
    if (gold_cohort_path) {
      gold = ghar::read_cohort(gold_cohort_path);
      options.gold = &gold;
    }
    *metrics_json = dup(ghar::evaluate(trajectories, options).to_json().dump());
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_score(const char* trajectories_path, const char* out_path, size_t* scored) {
  if (!trajectories_path || !out_path) return null_arg("trajectories_path/out_path");
  return guarded([&] {
    auto lines = ghar::score_trajectories(ghar::read_trajectories(trajectories_path));
    std::string text;
    std::size_t n = 0;
    for (const auto& l : lines) {
      if (l.at("scorable").get<bool>()) ++n;
      text += l.dump();
      text += '\n';
    }
    ghar::write_file(out_path, text);
    if (scored) *scored = n;
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_replay(const char* trajectories_path, const char* episode_id, char** text) {
  if (!trajectories_path || !text) return null_arg("trajectories_path/text");
  return guarded([&] {
    auto trajectories = ghar::read_trajectories(trajectories_path);
    for (const auto& tr : trajectories) {
      if (!episode_id || tr.episode_id == episode_id) {
        *text = dup(ghar::render_replay(tr));
        return GHAR_OK;
      }
    }
    if (!episode_id) throw ghar::Error(ErrorCode::kNotFound, "trajectory file is empty");
    throw ghar::Error(ErrorCode::kNotFound, std::string("unknown episode '") + episode_id + "'");
  });
}

GHAR_API ghar_status ghar_gen_cohort(const char* spec_json, const char* out_path) {
  if (!out_path) return null_arg("out_path");
  return guarded([&] {
    ghar::CohortSpec spec;
    if (spec_json) {
      json j = parse_json_arg(spec_json, "cohort spec");
      static const std::set<std::string> kKeys{"seed", "n_patients", "n_diagnoses", "n_procedures",
                                               "n_medications", "min_visits", "max_visits", "mean_stay_days",
                                               "dec_prevalence", "high_risk_rate", "kappa"};
      for (const auto& [key, _] : j.items()) {
        if (!kKeys.contains(key)) throw ghar::Error(ErrorCode::kInvalidArgument, "unknown cohort key '" + key + "'");
      }
      spec.seed = j.value("seed", spec.seed);
      spec.n_patients = j.value("n_patients", spec.n_patients);
      spec.n_diagnoses = j.value("n_diagnoses", spec.n_diagnoses);
      spec.n_procedures = j.value("n_procedures", spec.n_procedures);
      spec.n_medications = j.value("n_medications", spec.n_medications);
      spec.min_visits = j.value("min_visits", spec.min_visits);
      spec.max_visits = j.value("max_visits", spec.max_visits);
      spec.mean_stay_days = j.value("mean_stay_days", spec.mean_stay_days);
      spec.dec_prevalence = j.value("dec_prevalence", spec.dec_prevalence);
      spec.high_risk_rate = j.value("high_risk_rate", spec.high_risk_rate);
      spec.kappa = j.value("kappa", spec.kappa);
    }
    ghar::write_file(out_path, ghar::serialize_cohort(ghar::gen_synthetic_cohort(spec)));
    return GHAR_OK;
  });
}

GHAR_API ghar_status ghar_gen_kg(uint64_t seed, size_t n_nodes, const char* out_path) {
  if (!out_path) return null_arg("out_path");
  return guarded([&] {
    ghar::write_file(out_path, ghar::to_tsv(ghar::gen_synthetic_kg(seed, n_nodes)));
    return GHAR_OK;
  });
}

}  // extern "C"
