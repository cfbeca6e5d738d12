#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lidkit/experiments.hpp"

using namespace lidkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lidkit_exp_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Config fast_config(const TempDir& dir) {
  Config cfg;
  cfg.synth_families = 2;
  cfg.synth_langs_per_family = 2;
  cfg.synth_dim = 6;
  cfg.synth_samples_per_language = 40;
  cfg.trunk_dims = {8};
  cfg.language_hidden_dims = {6};
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.suite_seeds = 2;
  cfg.results_dir = (dir.path / "results").string();
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("standard variants cover the comparison rows") {
  auto variants = standard_variants();
  REQUIRE(variants.size() == 5);
  CHECK(variants[0].name == "single-task");
  CHECK(variants[0].mode == MultitaskMode::Single);
  CHECK_FALSE(variants[0].bce);
  CHECK(variants[2].name == "no-haus");
  CHECK(variants[2].mode == MultitaskMode::Hard);
  CHECK(variants[2].bce);
  CHECK(variants[3].name == "no-bce");
  CHECK(variants[3].mode == MultitaskMode::Haus);
  CHECK_FALSE(variants[3].bce);
  CHECK(variants[4].bce);
}

TEST_CASE("mean_sd matches hand values") {
  MeanSd m = mean_sd({1.0, 2.0, 3.0});
  CHECK(m.mean == doctest::Approx(2.0));
  CHECK(m.sd == doctest::Approx(1.0));
  MeanSd single = mean_sd({4.2});
  CHECK(single.mean == 4.2);
  CHECK(single.sd == 0.0);
  CHECK(format_mean_sd(m) == "200.00 +- 100.00");
}

TEST_CASE("run_suite pairs datasets and seeds across variants") {
  TempDir dir;
  Config cfg = fast_config(dir);

  SUBCASE("one variant gives one summary row") {
    SuiteResult res = run_suite(cfg, {{"solo", MultitaskMode::Single, false,
                                       false}});
    CHECK(res.runs.size() == cfg.suite_seeds);
    std::istringstream in(slurp(cfg.results_dir + "/suite_results.tsv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 2);  // header + one variant
  }

  SUBCASE("the per-seed data triple is identical across calls") {
    auto a = detail::make_suite_data(cfg, 1);
    auto b = detail::make_suite_data(cfg, 1);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i)
      CHECK(a.train.samples[i].features == b.train.samples[i].features);
    REQUIRE(a.eval.size() == b.eval.size());
    for (std::size_t i = 0; i < a.eval.size(); ++i)
      CHECK(a.eval.samples[i].features == b.eval.samples[i].features);
  }

  SUBCASE("two variants produce paired rows and a reproducible table") {
    std::vector<Variant> pair = {
        {"single-task", MultitaskMode::Single, false, false},
        {"haus-bce", MultitaskMode::Haus, true, true}};
    SuiteResult r1 = run_suite(cfg, pair);
    std::string table1 = slurp(cfg.results_dir + "/suite_results.tsv");
    std::string runs1 = slurp(cfg.results_dir + "/suite_runs.tsv");
    SuiteResult r2 = run_suite(cfg, pair);
    CHECK(slurp(cfg.results_dir + "/suite_results.tsv") == table1);
    CHECK(slurp(cfg.results_dir + "/suite_runs.tsv") == runs1);
    CHECK(r1.runs.size() == 4);
    for (std::size_t i = 0; i < r1.runs.size(); ++i) {
      CHECK(r1.runs[i].cell.val_cost == r2.runs[i].cell.val_cost);
      CHECK(r1.runs[i].cell.eval_cost == r2.runs[i].cell.eval_cost);
    }
  }
}

TEST_CASE("an aborted suite keeps its partial results file") {
  TempDir dir;
  Config cfg = fast_config(dir);
  // force a failure inside the first run: the split leaves no validation
  cfg.train_fraction = 1.0;
  CHECK_THROWS(run_suite(cfg));
  std::string runs = slurp(cfg.results_dir + "/suite_runs.tsv");
  CHECK(runs.find("variant\tseed") == 0);  // header survived the abort
}

TEST_CASE("run_backends tabulates cosine, MCLR and the staircase model") {
  TempDir dir;
  Config cfg = fast_config(dir);
  std::vector<BackendRow> rows = run_backends(cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "cosine");
  CHECK(rows[1].name == "mclr");
  CHECK(rows[2].name == "haus");
  for (const BackendRow& r : rows) {
    CHECK(r.val_cost.mean >= 0.0);
    CHECK(r.eval_cost.mean >= 0.0);
    CHECK(r.eval_cost.mean <= 1.0);
  }
  std::string table = slurp(cfg.results_dir + "/backends_results.tsv");
  CHECK(table.find("backend\tval_c_primary\teval_c_primary") == 0);
  // deterministic rerun
  std::vector<BackendRow> again = run_backends(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(again[i].val_cost.mean == rows[i].val_cost.mean);
    CHECK(again[i].eval_cost.mean == rows[i].eval_cost.mean);
  }
}

TEST_CASE("run_loso repeats with fresh held-out speakers") {
  TempDir dir;
  Config cfg = fast_config(dir);
  cfg.synth_speakers_per_language = 9;
  cfg.synth_speaker_spread = 0.3;
  cfg.loso_repetitions = 3;

  LosoResult res = run_loso(cfg);
  REQUIRE(res.repetitions.size() == 3);

  SUBCASE("held-out speaker sets are pairwise disjoint") {
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b)
        for (std::size_t s : res.repetitions[a].held_out_speakers)
          CHECK(res.repetitions[b].held_out_speakers.count(s) == 0);
  }

  SUBCASE("results file has one row per repetition plus aggregates") {
    std::string text = slurp(cfg.results_dir + "/loso_results.tsv");
    CHECK(text.find("# aggregate c_primary") != std::string::npos);
    std::istringstream in(text);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 4);  // header + 3 repetitions
  }

  SUBCASE("deterministic per master seed") {
    LosoResult again = run_loso(cfg);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(again.repetitions[r].c_primary == res.repetitions[r].c_primary);
      CHECK(again.repetitions[r].held_out_speakers ==
            res.repetitions[r].held_out_speakers);
    }
  }

  SUBCASE("insufficient speakers is an error") {
    Config bad = cfg;
    bad.synth_speakers_per_language = 2;
    CHECK_THROWS_AS(run_loso(bad), InputError);
  }
}
