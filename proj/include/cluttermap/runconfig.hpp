#pragma once

#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cluttermap/eval/cross_validate.hpp"
#include "cluttermap/geo/provider.hpp"

namespace cluttermap {

// One JSON document drives every tunable. Unknown keys are rejected so typos
// cannot silently fall back to defaults; every default matches the paper
// where the paper pins a value.
struct RunConfig {
  std::uint64_t seed = 42;
  int threads = 0;  // 0: hardware concurrency

  struct Provider {
    std::string kind = "local";  // local | url
    std::string directory;       // local provider root
    std::string url_template;
    std::string api_key_env;
    double rate_limit_per_s = 5.0;
    int max_retries = 4;
    int retry_base_delay_ms = 250;
    int timeout_s = 10;
    int image_side = 640;
    int fetch_parallelism = 4;
  } provider;

  eval::Hyperparams training;

  struct Cv {
    int folds = 5;
    int kmeans_max_iters = 100;
  } cv;

  geo::CleaningConfig cleaning;

  struct Network {
    int input_side = 112;
  } network;

  std::map<ClutterLabel, std::size_t> quotas;

  struct Paths {
    std::string inventory;
    std::string images_dir;
    std::string detections;
    std::string manifest;
    std::string out_dir = "out";
    std::string independent_inventory;
    std::string independent_images_dir;
  } paths;

  int resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }

  std::unique_ptr<geo::ImageProvider> make_provider(
      const std::string& directory_override = "") const {
    if (provider.kind == "local") {
      const std::string dir =
          !directory_override.empty() ? directory_override : provider.directory;
      require(!dir.empty(), "local provider needs provider.directory");
      return std::make_unique<geo::LocalDirectoryProvider>(dir);
    }
    if (provider.kind == "url") {
      geo::UrlProviderConfig cfg;
      cfg.url_template = provider.url_template;
      cfg.api_key_env = provider.api_key_env;
      cfg.max_retries = provider.max_retries;
      cfg.retry_base_delay_ms = provider.retry_base_delay_ms;
      cfg.timeout_s = provider.timeout_s;
      cfg.rate_limit_per_s = provider.rate_limit_per_s;
      return std::make_unique<geo::UrlTemplateProvider>(cfg);
    }
    fail("provider.kind must be 'local' or 'url', got '", provider.kind, "'");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    require(ok, "unknown key '", key, "' in ", where);
  }
}

template <typename T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  detail::reject_unknown_keys(j,
                              {"seed", "threads", "provider", "training", "cross_validation",
                               "cleaning", "network", "quotas", "paths"},
                              "config root");
  detail::get_if_present(j, "seed", c.seed);
  detail::get_if_present(j, "threads", c.threads);
  if (j.contains("provider")) {
    const auto& p = j.at("provider");
    detail::reject_unknown_keys(
        p,
        {"kind", "directory", "url_template", "api_key_env", "rate_limit_per_s",
         "max_retries", "retry_base_delay_ms", "timeout_s", "image_side",
         "fetch_parallelism"},
        "provider");
    detail::get_if_present(p, "kind", c.provider.kind);
    detail::get_if_present(p, "directory", c.provider.directory);
    detail::get_if_present(p, "url_template", c.provider.url_template);
    detail::get_if_present(p, "api_key_env", c.provider.api_key_env);
    detail::get_if_present(p, "rate_limit_per_s", c.provider.rate_limit_per_s);
    detail::get_if_present(p, "max_retries", c.provider.max_retries);
    detail::get_if_present(p, "retry_base_delay_ms", c.provider.retry_base_delay_ms);
    detail::get_if_present(p, "timeout_s", c.provider.timeout_s);
    detail::get_if_present(p, "image_side", c.provider.image_side);
    detail::get_if_present(p, "fetch_parallelism", c.provider.fetch_parallelism);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    detail::reject_unknown_keys(
        t,
        {"learning_rate", "beta1", "beta2", "epsilon", "batch_size",
         "max_epochs", "early_stop_val_accuracy"},
        "training");
    detail::get_if_present(t, "learning_rate", c.training.adam.learning_rate);
    detail::get_if_present(t, "beta1", c.training.adam.beta1);
    detail::get_if_present(t, "beta2", c.training.adam.beta2);
    detail::get_if_present(t, "epsilon", c.training.adam.epsilon);
    detail::get_if_present(t, "batch_size", c.training.batch_size);
    detail::get_if_present(t, "max_epochs", c.training.max_epochs);
    detail::get_if_present(t, "early_stop_val_accuracy",
                           c.training.early_stop_val_accuracy);
  }
  if (j.contains("cross_validation")) {
    const auto& v = j.at("cross_validation");
    detail::reject_unknown_keys(v, {"folds", "kmeans_max_iters"},
                                "cross_validation");
    detail::get_if_present(v, "folds", c.cv.folds);
    detail::get_if_present(v, "kmeans_max_iters", c.cv.kmeans_max_iters);
  }
  if (j.contains("cleaning")) {
    const auto& v = j.at("cleaning");
    detail::reject_unknown_keys(
        v,
        {"file_size_threshold_bytes", "detector_score_threshold",
         "center_window_side", "image_side", "colocation_radius_m"},
        "cleaning");
    detail::get_if_present(v, "file_size_threshold_bytes",
                           c.cleaning.file_size_threshold_bytes);
    detail::get_if_present(v, "detector_score_threshold",
                           c.cleaning.detector_score_threshold);
    detail::get_if_present(v, "center_window_side", c.cleaning.center_window_side);
    detail::get_if_present(v, "image_side", c.cleaning.image_side);
    detail::get_if_present(v, "colocation_radius_m",
                           c.cleaning.colocation_radius_m);
  }
  if (j.contains("network")) {
    const auto& v = j.at("network");
    detail::reject_unknown_keys(v, {"input_side"}, "network");
    detail::get_if_present(v, "input_side", c.network.input_side);
  }
  if (j.contains("quotas")) {
    for (const auto& [key, value] : j.at("quotas").items())
      c.quotas[parse_clutter_label(key)] = value.get<std::size_t>();
  }
  if (j.contains("paths")) {
    const auto& v = j.at("paths");
    detail::reject_unknown_keys(
        v,
        {"inventory", "images_dir", "detections", "manifest", "out_dir",
         "independent_inventory", "independent_images_dir"},
        "paths");
    detail::get_if_present(v, "inventory", c.paths.inventory);
    detail::get_if_present(v, "images_dir", c.paths.images_dir);
    detail::get_if_present(v, "detections", c.paths.detections);
    detail::get_if_present(v, "manifest", c.paths.manifest);
    detail::get_if_present(v, "out_dir", c.paths.out_dir);
    detail::get_if_present(v, "independent_inventory",
                           c.paths.independent_inventory);
    detail::get_if_present(v, "independent_images_dir",
                           c.paths.independent_images_dir);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config: ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path, ": bad JSON: ", e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const Error& e) {
    fail(path, ": ", e.what());
  }
}

}  // namespace cluttermap
