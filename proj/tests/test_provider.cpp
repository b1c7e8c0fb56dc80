#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "cluttermap/geo/provider.hpp"

using namespace cluttermap;

namespace {

namespace fs = std::filesystem;

ImagePatch noise_image(int side, std::uint64_t seed) {
  Rng rng(seed);
  ImagePatch img(side, side);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

geo::InventoryRecord rec(const std::string& id, double lat = 45.0,
                         double lon = -75.0) {
  geo::InventoryRecord r;
  r.id = id;
  r.point = {lat, lon};
  r.label = ClutterLabel::Other;
  r.source = "src";
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cluttermap_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(LocalProvider, LoadsExistingFileAndRecordsByteSize) {
  TempDir dir;
  auto img = noise_image(64, 1);
  const auto bytes = io::encode_png(img);
  io::write_file_bytes((dir.path / "src_1.png").string(), bytes);
  geo::LocalDirectoryProvider provider(dir.path.string());
  auto out = provider.fetch("src:1", {45, -75});
  ASSERT_EQ(out.status, geo::FetchOutcome::Status::Ok);
  EXPECT_EQ(out.encoded.size(), bytes.size());
  EXPECT_EQ(out.image.width, 64);
  EXPECT_EQ(out.image.data, img.data);
}

TEST(LocalProvider, MissingFileMarksFetchFailed) {
  TempDir dir;
  geo::LocalDirectoryProvider provider(dir.path.string());
  auto out = provider.fetch("absent", {45, -75});
  EXPECT_EQ(out.status, geo::FetchOutcome::Status::Failed);
  EXPECT_NE(out.error.find("absent"), std::string::npos);
}

TEST(UrlTemplate, FillsPlaceholdersWithSixDecimals) {
  const std::string url = geo::fill_url_template(
      "https://maps.example/api?center={lat},{lon}&zoom=20&size=640x640&key={key}",
      {45.4215, -75.69721234}, "SECRET");
  EXPECT_EQ(url,
            "https://maps.example/api?center=45.421500,-75.697212&zoom=20&size="
            "640x640&key=SECRET");
}

TEST(FetchImage, WrongDimensionsMarkedInvalid) {
  TempDir dir;
  io::save_png((dir.path / "a.png").string(), noise_image(32, 2));
  geo::LocalDirectoryProvider provider(dir.path.string());
  auto out = geo::fetch_image(rec("a"), provider, 64);
  EXPECT_EQ(out.status, geo::FetchOutcome::Status::InvalidImage);
  EXPECT_NE(out.error.find("expected 64x64"), std::string::npos);
}

TEST(FetchAll, PersistsImagesAndMarksFailures) {
  TempDir src, dst;
  io::save_png((src.path / "ok.png").string(), noise_image(64, 3));
  geo::Inventory inv;
  inv.records = {rec("ok"), rec("missing")};
  geo::LocalDirectoryProvider provider(src.path.string());
  geo::FetchConfig cfg;
  cfg.expected_side = 64;
  cfg.parallelism = 2;
  cfg.images_dir = (dst.path / "imgs").string();
  auto manifest = geo::fetch_all(inv, provider, cfg);
  ASSERT_EQ(manifest.entries.size(), 2u);
  EXPECT_EQ(manifest.entries[0].status, geo::SampleStatus::Kept);
  EXPECT_TRUE(fs::exists(manifest.entries[0].image_path));
  EXPECT_EQ(static_cast<long long>(fs::file_size(manifest.entries[0].image_path)),
            manifest.entries[0].byte_size);
  EXPECT_EQ(manifest.entries[1].status, geo::SampleStatus::FetchFailed);
  // No partial files for the failed record.
  for (const auto& f : fs::directory_iterator(cfg.images_dir))
    EXPECT_EQ(f.path().extension(), ".png");
}

namespace {

// Local HTTP fixture: serves a PNG, optionally failing the first N requests.
class HttpFixture {
public:
  explicit HttpFixture(int fail_first = 0, int fail_status = 500)
      : fail_remaining_(fail_first) {
    body_bytes_ = io::encode_png(noise_image(64, 9));
    server_.Get("/tile", [this, fail_status](const httplib::Request&,
                                             httplib::Response& res) {
      ++hits_;
      if (fail_remaining_ > 0) {
        --fail_remaining_;
        res.status = fail_status;
        return;
      }
      res.set_content(std::string(body_bytes_.begin(), body_bytes_.end()),
                      "image/png");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~HttpFixture() {
    server_.stop();
    thread_.join();
  }

  int port() const { return port_; }
  int hits() const { return hits_; }

private:
  httplib::Server server_;
  std::thread thread_;
  std::vector<std::uint8_t> body_bytes_;
  std::atomic<int> fail_remaining_;
  std::atomic<int> hits_{0};
  int port_ = 0;
};

}  // namespace

TEST(UrlProvider, FetchesOverHttp) {
  HttpFixture fixture;
  geo::UrlProviderConfig cfg;
  cfg.url_template = "http://127.0.0.1:" + std::to_string(fixture.port()) +
                     "/tile?center={lat},{lon}";
  cfg.rate_limit_per_s = 0;  // unlimited in tests
  geo::UrlTemplateProvider provider(cfg);
  auto out = provider.fetch("x", {45.0, -75.0});
  ASSERT_EQ(out.status, geo::FetchOutcome::Status::Ok);
  EXPECT_EQ(out.image.width, 64);
  EXPECT_EQ(out.extension, "png");
}

TEST(UrlProvider, RetriesServerErrorsWithBackoff) {
  HttpFixture fixture(/*fail_first=*/2);
  geo::UrlProviderConfig cfg;
  cfg.url_template =
      "http://127.0.0.1:" + std::to_string(fixture.port()) + "/tile?c={lat},{lon}";
  cfg.max_retries = 4;
  cfg.retry_base_delay_ms = 1;
  cfg.rate_limit_per_s = 0;
  geo::UrlTemplateProvider provider(cfg);
  auto out = provider.fetch("x", {45.0, -75.0});
  EXPECT_EQ(out.status, geo::FetchOutcome::Status::Ok);
  EXPECT_EQ(fixture.hits(), 3);  // two failures then success
}

TEST(UrlProvider, GivesUpAfterRetryCap) {
  HttpFixture fixture(/*fail_first=*/100);
  geo::UrlProviderConfig cfg;
  cfg.url_template =
      "http://127.0.0.1:" + std::to_string(fixture.port()) + "/tile?c={lat},{lon}";
  cfg.max_retries = 2;
  cfg.retry_base_delay_ms = 1;
  cfg.rate_limit_per_s = 0;
  geo::UrlTemplateProvider provider(cfg);
  auto out = provider.fetch("x", {45.0, -75.0});
  EXPECT_EQ(out.status, geo::FetchOutcome::Status::Failed);
  EXPECT_EQ(fixture.hits(), 3);  // initial try + 2 retries
}

TEST(UrlProvider, ClientErrorDoesNotRetry) {
  HttpFixture fixture(/*fail_first=*/100, /*fail_status=*/404);
  geo::UrlProviderConfig cfg;
  cfg.url_template =
      "http://127.0.0.1:" + std::to_string(fixture.port()) + "/tile?c={lat},{lon}";
  cfg.max_retries = 3;
  cfg.retry_base_delay_ms = 1;
  cfg.rate_limit_per_s = 0;
  geo::UrlTemplateProvider provider(cfg);
  auto out = provider.fetch("x", {45.0, -75.0});
  EXPECT_EQ(out.status, geo::FetchOutcome::Status::Failed);
  EXPECT_EQ(fixture.hits(), 1);
}

TEST(UrlProvider, MissingApiKeyEnvRejected) {
  geo::UrlProviderConfig cfg;
  cfg.url_template = "http://h/t?c={lat},{lon}&key={key}";
  cfg.api_key_env = "CLUTTERMAP_TEST_KEY_THAT_DOES_NOT_EXIST";
  EXPECT_THROW(geo::UrlTemplateProvider{cfg}, Error);
}

TEST(RateLimiter, EnforcesMinimumSpacing) {
  geo::RateLimiter limiter(100.0);  // 10 ms apart
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_GE(std::chrono::duration<double>(elapsed).count(), 0.035);
}
