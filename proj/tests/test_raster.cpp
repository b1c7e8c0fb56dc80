#include <gtest/gtest.h>

#include <filesystem>

#include "cluttermap/eval/raster.hpp"
#include "cluttermap/eval/train.hpp"
#include "synthetic.hpp"

using namespace cluttermap;

namespace {

ThreadPool& pool() {
  static ThreadPool p(2);
  return p;
}

// Serves a deciduous texture for every cell; selected ids fail.
class StubProvider : public geo::ImageProvider {
public:
  explicit StubProvider(int side, std::set<std::string> fail_ids = {})
      : side_(side), fail_ids_(std::move(fail_ids)) {}

  geo::FetchOutcome fetch(const std::string& id, geo::GeoPoint) override {
    geo::FetchOutcome out;
    if (fail_ids_.count(id)) {
      out.error = "stubbed failure";
      return out;
    }
    out.image = synthetic::texture_image(ClutterLabel::Deciduous,
                                         std::hash<std::string>{}(id), side_);
    out.encoded = io::encode_png(out.image);
    out.status = geo::FetchOutcome::Status::Ok;
    return out;
  }

private:
  int side_;
  std::set<std::string> fail_ids_;
};

// One quickly trained pipeline over the synthetic textures.
eval::EnsembleModel trained_ensemble() {
  auto city = synthetic::make_city(12, 32, 31, 2);
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < city.size(); ++i)
    (i % 5 == 4 ? val : train).push_back(i);
  eval::Hyperparams hp;
  hp.max_epochs = 3;
  hp.early_stop_val_accuracy = 0.99;
  auto s1 = eval::train_model(eval::ModelKind::Stage1, city, train, val, hp, 1,
                              pool());
  auto st = eval::train_model(eval::ModelKind::Stage2Tree, city, train, val, hp,
                              2, pool());
  auto sb = eval::train_model(eval::ModelKind::Stage2Building, city, train, val,
                              hp, 3, pool());
  std::vector<eval::TwoStagePipeline> members;
  members.emplace_back(s1.checkpoint, st.checkpoint, sb.checkpoint);
  return eval::EnsembleModel::from_two_stage(std::move(members));
}

}  // namespace

TEST(Raster, StubTreeTextureYieldsTreeCellsEverywhere) {
  auto ensemble = trained_ensemble();
  StubProvider provider(64);
  auto raster = eval::classify_grid({45.0, -75.0}, {45.000894, -74.998735},
                                    10.0, ensemble, provider, 64, 2);
  EXPECT_EQ(raster.width, 10);
  EXPECT_EQ(raster.height, 10);
  for (std::uint8_t cell : raster.cells) {
    EXPECT_TRUE(cell == static_cast<std::uint8_t>(ClutterLabel::Deciduous) ||
                cell == static_cast<std::uint8_t>(ClutterLabel::Coniferous))
        << static_cast<int>(cell);
  }
}

TEST(Raster, FetchFailuresBecomeReservedUnknownValue) {
  auto ensemble = trained_ensemble();
  StubProvider provider(64, {"cell_0_0", "cell_1_2"});
  auto raster = eval::classify_grid({45.0, -75.0}, {45.0003, -74.99957}, 10.0,
                                    ensemble, provider, 64, 2);
  EXPECT_EQ(raster.at(0, 0), eval::kRasterUnknown);
  EXPECT_EQ(raster.at(2, 1), eval::kRasterUnknown);
  EXPECT_NE(raster.at(1, 1), eval::kRasterUnknown);
}

TEST(Raster, ZeroAreaBoundingBoxRejected) {
  auto city = synthetic::make_city(2, 32, 1, 1);
  StubProvider provider(64);
  // Need any ensemble; reuse an untrained single-stage one.
  auto config = eval::config_for(eval::ModelKind::SingleStage, 32);
  auto netw = net::build_network<float>(config, 5);
  std::vector<net::Predictor<float>> singles;
  singles.emplace_back(
      net::checkpoint_from_network(netw, config, net::TrainingMeta{}));
  auto ensemble = eval::EnsembleModel::from_single_stage(std::move(singles));
  EXPECT_THROW(eval::classify_grid({45.0, -75.0}, {45.0, -74.99}, 1.0, ensemble,
                                   provider, 64),
               Error);
}

TEST(Raster, OneMeterPixelSupportedAndSidecarRoundTrips) {
  auto config = eval::config_for(eval::ModelKind::SingleStage, 32);
  auto netw = net::build_network<float>(config, 5);
  std::vector<net::Predictor<float>> singles;
  singles.emplace_back(
      net::checkpoint_from_network(netw, config, net::TrainingMeta{}));
  auto ensemble = eval::EnsembleModel::from_single_stage(std::move(singles));
  StubProvider provider(64);
  auto raster = eval::classify_grid({45.0, -75.0}, {45.00008, -74.99989}, 1.0,
                                    ensemble, provider, 64, 2);
  EXPECT_GE(raster.width, 8);
  EXPECT_GE(raster.height, 8);

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "cm_raster";
  fs::create_directories(dir);
  const std::string png = (dir / "map.png").string();
  const std::string sidecar = (dir / "map.json").string();
  eval::save_raster(raster, png, sidecar);
  EXPECT_TRUE(fs::exists(png));
  auto meta = eval::load_raster_sidecar(sidecar);
  EXPECT_EQ(meta.width, raster.width);
  EXPECT_EQ(meta.height, raster.height);
  EXPECT_DOUBLE_EQ(meta.pixel_size_m, 1.0);
  EXPECT_DOUBLE_EQ(meta.origin.lat, raster.origin.lat);

  // The indexed PNG decodes back to palette colors.
  auto img = io::load_image(png);
  EXPECT_EQ(img.width, raster.width);
  const auto& palette = eval::raster_palette();
  const auto idx = raster.at(0, 0);
  EXPECT_EQ(img.at(0, 0, 0), palette[idx].r);
  EXPECT_EQ(img.at(0, 0, 1), palette[idx].g);
  EXPECT_EQ(img.at(0, 0, 2), palette[idx].b);
  fs::remove_all(dir);
}
