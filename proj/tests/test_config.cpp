#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scoreflow/config.hpp"

using namespace scoreflow;
namespace fs = std::filesystem;

namespace {

std::string write_temp_config(const std::string& body) {
  const std::string path = (fs::temp_directory_path() / "sf_config.txt").string();
  std::ofstream os(path, std::ios::trunc);
  os << body;
  return path;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("presets define the two scales") {
  const ExperimentConfig desk = desk_preset();
  CHECK(desk.train.iterations == 6000);
  CHECK(desk.mlp.hidden == std::vector<int>{64, 64});
  const ExperimentConfig paper = paper_preset();
  CHECK(paper.train.iterations == 100000);
  CHECK(paper.mlp.hidden == std::vector<int>{80, 80});
  CHECK(paper.sampler.n == 3000000);
  CHECK(paper.train.lr_start == 1e-3);
  CHECK(paper.train.lr_end == 1e-5);
}

TEST_CASE("config files parse with comments and sections") {
  const std::string path = write_temp_config(
      "# experiment scale\n"
      "train.iterations = 123\n"
      "mlp.hidden = 8, 8\n"
      "experiment.weights = 0, 0.5, 2\n"
      "experiment.out = /tmp/sf_out   # trailing comment\n");
  ExperimentConfig cfg = desk_preset();
  apply_config(cfg, parse_config_file(path));
  CHECK(cfg.train.iterations == 123);
  CHECK(cfg.mlp.hidden == std::vector<int>{8, 8});
  CHECK(cfg.weights == std::vector<double>{0.0, 0.5, 2.0});
  CHECK(cfg.out_dir == "/tmp/sf_out");
  fs::remove(path);
}

TEST_CASE("errors name the offending key or line") {
  ExperimentConfig cfg = desk_preset();
  CHECK_THROWS_WITH_AS(apply_config(cfg, {{"train.wrong_key", "1"}}),
                       doctest::Contains("train.wrong_key"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config(cfg, {{"train.iterations", "ten"}}),
                       doctest::Contains("train.iterations"), ConfigError);

  const std::string path = write_temp_config("train.iterations 55\n");
  CHECK_THROWS_WITH_AS(parse_config_file(path), doctest::Contains("line 1"), ConfigError);
  fs::remove(path);

  CHECK_THROWS_AS(parse_config_file("/nonexistent/sf.cfg"), ConfigError);
}

TEST_CASE("overrides are applied after file values") {
  const std::string path = write_temp_config("train.w_R = 1\n");
  const ExperimentConfig cfg = make_config("desk", path, {"train.w_R=0", "sampler.n=777"});
  CHECK(cfg.train.w_R == 0.0);
  CHECK(cfg.sampler.n == 777);
  fs::remove(path);
  CHECK_THROWS_AS(make_config("gigantic", "", {}), ConfigError);
  CHECK_THROWS_AS(make_config("desk", "", {"no_equals_sign"}), ConfigError);
}

TEST_CASE("validation rejects inconsistent grids") {
  ExperimentConfig cfg = desk_preset();
  cfg.weights = {0.0, -1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = desk_preset();
  cfg.metric_downsample = 3;  // does not divide 64
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = desk_preset();
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("cell directory names are filesystem-safe and unique") {
  CHECK(cell_dir_name({"mixture", 0.1, 3}) == "mixture_w0.1_s3");
  CHECK(cell_dir_name({"circles", 10.0, 12}) == "circles_w10_s12");
}

TEST_CASE("run reports round trip through json") {
  RunReport r;
  r.dataset = "circles";
  r.w_R = 0.1;
  r.seed = 5;
  r.final_dsm = 1.25;
  r.heldout_residual = 0.33;
  r.w2sq_ode_sde = 0.004;
  r.checkpoint_path = "somewhere/model.ckpt";
  r.wall_seconds = 12.5;
  const std::string path = (fs::temp_directory_path() / "sf_report.json").string();
  write_report_json(path, r);
  const RunReport back = read_report_json(path);
  CHECK(back.dataset == r.dataset);
  CHECK(back.w_R == r.w_R);
  CHECK(back.seed == r.seed);
  CHECK(back.final_dsm == r.final_dsm);
  CHECK(back.heldout_residual == r.heldout_residual);
  CHECK(back.w2sq_ode_sde == r.w2sq_ode_sde);
  CHECK(back.checkpoint_path == r.checkpoint_path);
  CHECK_FALSE(back.failed);
  fs::remove(path);
}

}  // TEST_SUITE
