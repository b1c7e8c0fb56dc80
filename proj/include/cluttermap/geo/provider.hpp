#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "cluttermap/core/parallel.hpp"
#include "cluttermap/geo/clean.hpp"
#include "cluttermap/geo/inventory.hpp"
#include "cluttermap/io/image_codec.hpp"

namespace cluttermap::geo {

// Global requests-per-second cap shared by all fetch workers.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_second) {
    if (requests_per_second > 0)
      interval_ = std::chrono::duration<double>(1.0 / requests_per_second);
  }

  void acquire() {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::scoped_lock lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      next_ = std::max(next_, now);
      slot = next_;
      next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          interval_);
    }
    std::this_thread::sleep_until(slot);
  }

private:
  std::chrono::duration<double> interval_{0};
  std::chrono::steady_clock::time_point next_{};
  std::mutex mu_;
};

struct FetchOutcome {
  enum class Status { Ok, Failed, InvalidImage };
  Status status = Status::Failed;
  ImagePatch image;
  std::vector<std::uint8_t> encoded;  // bytes as fetched (PNG or JPEG)
  std::string extension = "png";
  std::string error;
};

class ImageProvider {
public:
  virtual ~ImageProvider() = default;
  virtual FetchOutcome fetch(const std::string& id, GeoPoint point) = 0;
};

// File name an inventory id maps to on disk (provider and persistence agree
// on this mapping).
inline std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return out;
}

// Reads <dir>/<sanitized id>.{png,jpg,jpeg}.
class LocalDirectoryProvider : public ImageProvider {
public:
  explicit LocalDirectoryProvider(std::string directory)
      : directory_(std::move(directory)) {}

  FetchOutcome fetch(const std::string& id, GeoPoint) override {
    FetchOutcome out;
    const std::string stem =
        (std::filesystem::path(directory_) / sanitize_id(id)).string();
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const std::string path = stem + ext;
      if (!std::filesystem::exists(path)) continue;
      try {
        out.encoded = io::read_file_bytes(path);
        out.image = io::decode_image(out.encoded);
        out.extension = ext + 1;
        out.status = FetchOutcome::Status::Ok;
      } catch (const Error& e) {
        out.status = FetchOutcome::Status::InvalidImage;
        out.error = e.what();
      }
      return out;
    }
    out.error = "no image file for id '" + id + "' under " + directory_;
    return out;
  }

private:
  std::string directory_;
};

// Fills {lat}/{lon} (6 decimal places) and {key} into the template. The API
// key comes from the environment variable named in the config and is never
// written to any file.
inline std::string fill_url_template(const std::string& url_template,
                                     GeoPoint point, const std::string& key) {
  char lat[32], lon[32];
  std::snprintf(lat, sizeof lat, "%.6f", point.lat);
  std::snprintf(lon, sizeof lon, "%.6f", point.lon);
  std::string url = url_template;
  auto replace_all = [&](const std::string& tag, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = url.find(tag, pos)) != std::string::npos) {
      url.replace(pos, tag.size(), value);
      pos += value.size();
    }
  };
  replace_all("{lat}", lat);
  replace_all("{lon}", lon);
  replace_all("{key}", key);
  return url;
}

struct UrlProviderConfig {
  std::string url_template;     // with {lat}, {lon}, optional {key}
  std::string api_key_env;      // environment variable holding the key
  int max_retries = 4;          // retry attempts after the first try
  int retry_base_delay_ms = 250;
  int timeout_s = 10;
  double rate_limit_per_s = 5.0;
};

class UrlTemplateProvider : public ImageProvider {
public:
  explicit UrlTemplateProvider(UrlProviderConfig config)
      : config_(std::move(config)), limiter_(config_.rate_limit_per_s) {
    require(config_.url_template.find("{lat}") != std::string::npos &&
                config_.url_template.find("{lon}") != std::string::npos,
            "URL template must contain {lat} and {lon} placeholders");
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      require(key != nullptr, "environment variable ", config_.api_key_env,
              " (provider API key) is not set");
      key_ = key;
    }
  }

  FetchOutcome fetch(const std::string& id, GeoPoint point) override {
    const std::string url = fill_url_template(config_.url_template, point, key_);
    const auto [base, path] = split_url(url);
    FetchOutcome out;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto delay = std::chrono::milliseconds(
            config_.retry_base_delay_ms * (1LL << (attempt - 1)));
        std::this_thread::sleep_for(delay);
      }
      limiter_.acquire();
      httplib::Client client(base);
      client.set_connection_timeout(config_.timeout_s, 0);
      client.set_read_timeout(config_.timeout_s, 0);
      auto res = client.Get(path);
      if (!res) {
        out.error = "connection error for '" + id +
                    "': " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        out.error = "HTTP " + std::to_string(res->status) + " for '" + id + "'";
        continue;
      }
      if (res->status != 200) {
        out.error = "HTTP " + std::to_string(res->status) + " for '" + id + "'";
        return out;  // client error: retrying will not help
      }
      out.encoded.assign(res->body.begin(), res->body.end());
      try {
        out.image = io::decode_image(out.encoded);
        out.extension = io::looks_like_png(out.encoded.data(), out.encoded.size())
                            ? "png"
                            : "jpg";
        out.status = FetchOutcome::Status::Ok;
      } catch (const Error& e) {
        out.status = FetchOutcome::Status::InvalidImage;
        out.error = e.what();
      }
      return out;
    }
    return out;  // retries exhausted
  }

private:
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    require(scheme_end != std::string::npos, "URL has no scheme: ", url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
  }

  UrlProviderConfig config_;
  std::string key_;
  RateLimiter limiter_;
};

// ---------------------------------------------------------------------------
// Fetch orchestration
// ---------------------------------------------------------------------------

struct FetchConfig {
  int expected_side = 640;
  int parallelism = 4;
  std::string images_dir;  // empty: do not persist (caller keeps in memory)
};

inline std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Fetches one record through the provider and validates dimensions. Persists
// nothing by itself.
inline FetchOutcome fetch_image(const InventoryRecord& record,
                                ImageProvider& provider,
                                int expected_side = 640) {
  FetchOutcome out = provider.fetch(record.id, record.point);
  if (out.status == FetchOutcome::Status::Ok &&
      (out.image.width != expected_side || out.image.height != expected_side)) {
    out.status = FetchOutcome::Status::InvalidImage;
    out.error = "expected " + std::to_string(expected_side) + "x" +
                std::to_string(expected_side) + ", got " +
                std::to_string(out.image.width) + "x" +
                std::to_string(out.image.height);
  }
  return out;
}

// Concurrent fetch over the whole inventory. Each record either fully
// persists (write-to-temp, atomic rename) or is marked failed; manifest
// entries come back in inventory order regardless of thread interleaving.
inline SampleManifest fetch_all(const Inventory& inventory,
                                ImageProvider& provider,
                                const FetchConfig& config) {
  SampleManifest manifest;
  manifest.entries.resize(inventory.records.size());
  if (!config.images_dir.empty())
    std::filesystem::create_directories(config.images_dir);
  ThreadPool pool(config.parallelism);
  pool.parallel_for(0, static_cast<int>(inventory.records.size()), [&](int i) {
    const auto& record = inventory.records[static_cast<std::size_t>(i)];
    ManifestEntry entry;
    entry.id = record.id;
    entry.fetch_timestamp = utc_timestamp_now();
    FetchOutcome out = fetch_image(record, provider, config.expected_side);
    if (out.status == FetchOutcome::Status::Ok) {
      entry.byte_size = static_cast<long long>(out.encoded.size());
      entry.status = SampleStatus::Kept;
      if (!config.images_dir.empty()) {
        const std::string path =
            (std::filesystem::path(config.images_dir) /
             (sanitize_id(record.id) + "." + out.extension))
                .string();
        const std::string tmp = path + ".tmp";
        io::write_file_bytes(tmp, out.encoded);
        std::filesystem::rename(tmp, path);
        entry.image_path = path;
      }
    } else {
      entry.status = SampleStatus::FetchFailed;
      entry.reason = out.status == FetchOutcome::Status::InvalidImage
                         ? std::string(kReasonInvalidImage) + ": " + out.error
                         : std::string(kReasonFetchFailed) + ": " + out.error;
    }
    manifest.entries[static_cast<std::size_t>(i)] = std::move(entry);
  });
  return manifest;
}

}  // namespace cluttermap::geo
