#include <gtest/gtest.h>

#include <cstdlib>
#include <stdexcept>

#include "gavg/experiment.hpp"
#include "support.hpp"

namespace {

using gavg::ExperimentConfig;
using nlohmann::json;
namespace fs = std::filesystem;

json minimal_json() {
  return json::parse(R"({
    "problem": {"kind": "quadratic", "dim": 4, "l": 1, "L": 2,
                "noise": {"kind": "additive_gaussian", "sigma": 0.1}},
    "schedule": {"s": 10},
    "methods": [{"method": "sg"}],
    "run": {"n_trials": 2, "max_k": 100}
  })");
}

TEST(Config, DefaultsFilledIn) {
  const auto c = gavg::parse_config(minimal_json());
  EXPECT_EQ(c.problem.kind, "quadratic");
  EXPECT_EQ(c.methods.size(), 1u);
  EXPECT_EQ(c.methods[0].label, "sg");
  EXPECT_EQ(c.run.checkpoints_per_decade, 20);
  EXPECT_FALSE(c.schedule.sigma.has_value());
  EXPECT_FALSE(c.run.snapshots);
}

TEST(Config, RejectsUnknownsAndDuplicates) {
  auto j = minimal_json();
  j["methods"][0]["method"] = "adam";
  EXPECT_THROW(gavg::parse_config(j), gavg::ConfigError);
  j = minimal_json();
  j["run"]["n_trails"] = 3;
  EXPECT_THROW(gavg::parse_config(j), gavg::ConfigError);
  j = minimal_json();
  j["methods"].push_back({{"method", "sg"}});
  EXPECT_THROW(gavg::parse_config(j), gavg::ConfigError);
  j = minimal_json();
  j["problem"]["kind"] = "cubic";
  EXPECT_THROW(gavg::parse_config(j), gavg::ConfigError);
  j = minimal_json();
  j["run"]["max_k"] = "many";
  EXPECT_THROW(gavg::parse_config(j), gavg::ConfigError);
}

TEST(Config, CanonicalFormRoundTrips) {
  auto j = minimal_json();
  j["schedule"]["sigma"] = 70.5;
  const auto c = gavg::parse_config(j);
  const auto back = gavg::parse_config(gavg::canonical_json(c));
  EXPECT_EQ(gavg::canonical_json(back), gavg::canonical_json(c));
  EXPECT_EQ(gavg::config_hash(back), gavg::config_hash(c));
}

TEST(Config, HashTracksSemanticFieldsOnly) {
  const auto base = gavg::parse_config(minimal_json());
  const auto h = gavg::config_hash(base);
  auto j = minimal_json();
  j["output"] = "somewhere/else";
  EXPECT_EQ(gavg::config_hash(gavg::parse_config(j)), h);
  // Spelling out a default is not a semantic change.
  j = minimal_json();
  j["run"]["checkpoints_per_decade"] = 20;
  EXPECT_EQ(gavg::config_hash(gavg::parse_config(j)), h);
  for (auto edit : {+[](json& x) { x["run"]["n_trials"] = 3; },
                    +[](json& x) { x["problem"]["noise"]["sigma"] = 0.2; },
                    +[](json& x) { x["schedule"]["s"] = 11; },
                    +[](json& x) { x["methods"][0]["label"] = "plain"; },
                    +[](json& x) { x["run"]["base_seed"] = 2; },
                    +[](json& x) { x["problem"]["data_seed"] = 5; }}) {
    j = minimal_json();
    edit(j);
    EXPECT_NE(gavg::config_hash(gavg::parse_config(j)), h) << j.dump();
  }
}

TEST(Validate, StrictBoundaryIsInvalidSchedule) {
  auto j = minimal_json();
  j["schedule"]["s"] = 4.0;  // l = 1
  const auto c = gavg::parse_config(j);
  try {
    gavg::validate_config(c);
    FAIL() << "expected InvalidSchedule";
  } catch (const gavg::InvalidSchedule& e) {
    EXPECT_FALSE(e.report.s_gt_4_over_l);
    EXPECT_NE(std::string(e.what()).find("strict"), std::string::npos);
  }
}

TEST(Validate, ScheduleOnlyCheckedWhenUsed) {
  auto j = minimal_json();
  j["schedule"]["s"] = 4.0;
  j["methods"] = json::array({{{"method", "sgm"}, {"alpha", 0.05}}});
  EXPECT_NO_THROW(gavg::validate_config(gavg::parse_config(j)));
}

TEST(Validate, MethodProblemPairing) {
  auto j = minimal_json();
  j["methods"] = json::array({{{"method", "svrg"}}});
  EXPECT_THROW(gavg::validate_config(gavg::parse_config(j)), gavg::ConfigError);
  j["methods"] = json::array({{{"method", "sgm"}, {"beta", 1.0}}});
  EXPECT_THROW(gavg::validate_config(gavg::parse_config(j)), gavg::ConfigError);
}

TEST(Run, MinimalConfigWritesExpectedTree) {
  const auto c = gavg::parse_config(minimal_json());
  const auto dir = gavg_test::scratch_dir("minimal");
  gavg::write_outputs(gavg::run_experiment(c, 1), dir / "a");
  EXPECT_TRUE(fs::exists(dir / "a/traces/sg/trial_0000.csv"));
  EXPECT_TRUE(fs::exists(dir / "a/traces/sg/trial_0001.csv"));
  EXPECT_FALSE(fs::exists(dir / "a/traces/sg/trial_0002.csv"));
  EXPECT_TRUE(fs::exists(dir / "a/summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "a/aggregates/sg.csv"));
  const auto manifest = json::parse(gavg_test::slurp(dir / "a/manifest.json"));
  EXPECT_EQ(manifest["config_hash"], gavg::config_hash(c));
  EXPECT_EQ(manifest["stream_ids"], json::array({0, 1}));
  EXPECT_EQ(gavg::parse_config(manifest["config"]).run.n_trials, 2);
  // Rerun into a second directory: identical bytes.
  gavg::write_outputs(gavg::run_experiment(c, 1), dir / "b");
  EXPECT_EQ(gavg_test::compare_trees(dir / "a", dir / "b"), "");
}

TEST(Run, ThreadCountDoesNotChangeOutputs) {
  auto j = minimal_json();
  j["run"]["n_trials"] = 7;
  j["run"]["snapshots"] = true;
  j["methods"] = json::array({{{"method", "accel"}}, {{"method", "sgm"}}, {{"method", "iteravg"}}});
  const auto c = gavg::parse_config(j);
  const auto dir = gavg_test::scratch_dir("threads");
  gavg::write_outputs(gavg::run_experiment(c, 1), dir / "t1");
  gavg::write_outputs(gavg::run_experiment(c, 4), dir / "t4");
  EXPECT_EQ(gavg_test::compare_trees(dir / "t1", dir / "t4"), "");
}

TEST(Run, SgmAlphaTunedAndRecorded) {
  auto j = minimal_json();
  j["methods"] = json::array({{{"method", "sgm"}, {"beta", 0.9}}});
  const auto res = gavg::run_experiment(gavg::parse_config(j), 1);
  ASSERT_TRUE(res.methods[0].method.tuned);
  const double alpha_L = res.methods[0].method.alpha * res.constants.L;
  bool on_grid = false;
  for (double g : gavg::kSgmAlphaGrid) on_grid |= std::abs(alpha_L - g) < 1e-12;
  EXPECT_TRUE(on_grid);
  const auto m = gavg::manifest_json(res);
  EXPECT_TRUE(m["methods"][0]["alpha_tuned"].get<bool>());
  EXPECT_EQ(m["methods"][0]["pilot_stream_ids"].size(), 2u);
}

TEST(Run, SvrgDefaultsOnLeastSquares) {
  const auto j = json::parse(R"({
    "problem": {"kind": "least_squares", "n": 40, "dim": 3, "ridge": 0.5,
                "noise": {"kind": "subsample", "batch": 1}},
    "methods": [{"method": "svrg"}],
    "run": {"n_trials": 1, "max_k": 200}
  })");
  const auto res = gavg::run_experiment(gavg::parse_config(j), 1);
  const auto& m = res.methods[0].method;
  EXPECT_GT(m.alpha, 0.0);
  EXPECT_GT(m.svrg_m, 0);
  ASSERT_TRUE(m.svrg_rho.has_value());
  EXPECT_LT(*m.svrg_rho, 1.0);
}

TEST(Run, TrialDirectionsRecordedAtCheckpoints) {
  auto j = minimal_json();
  j["run"]["snapshots"] = true;
  j["methods"] = json::array({{{"method", "accel"}}});
  const auto c = gavg::parse_config(j);
  const gavg::Problem prob = gavg::build_problem(c.problem);
  gavg::ResolvedMethod rm;
  rm.config = c.methods[0];
  const auto sched = gavg::resolve_schedule(c.schedule, prob.constants());
  const std::vector<std::int64_t> cps{1, 5, 100};
  const auto tr = gavg::run_trial(prob, rm, gavg::Stepsize::decay(sched), cps, 100, 1, 0, true);
  ASSERT_EQ(tr.entries.size(), 3u);
  // Replay by hand: the direction stored at k is the one that moved x_k to x_{k+1}.
  auto st = gavg::AcceleratedState::start(gavg::Vector::Zero(4), 20.0);
  gavg::RngStream rng(1, 0);
  for (int k = 1; k <= 5; ++k) {
    if (k == 5) {
      EXPECT_EQ(*tr.entries[1].iterate, st.x);
    }
    gavg::accel_step(st, prob, gavg::Stepsize::decay(sched), rng);
  }
  EXPECT_EQ(*tr.entries[1].direction, st.direction);
}

TEST(Parallel, FirstErrorByIndexIsRethrown) {
  try {
    gavg::parallel_for(10, 3, [](std::size_t i) {
      if (i == 7) throw std::runtime_error("seven");
      if (i == 4) throw std::runtime_error("four");
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "four");
  }
}

TEST(Parallel, EnvironmentCapsThreads) {
  ::setenv("GAVG_THREADS", "2", 1);
  EXPECT_EQ(gavg::resolve_threads(8), 2u);
  EXPECT_EQ(gavg::resolve_threads(1), 1u);
  ::unsetenv("GAVG_THREADS");
  EXPECT_EQ(gavg::resolve_threads(8), 8u);
}

TEST(PlotData, DerivesLogSeries) {
  auto j = minimal_json();
  j["run"]["snapshots"] = true;
  const auto dir = gavg_test::scratch_dir("plotdata");
  gavg::write_outputs(gavg::run_experiment(gavg::parse_config(j), 1), dir / "run");
  const auto labels = gavg::plotdata(dir / "run", dir / "plot");
  ASSERT_EQ(labels, std::vector<std::string>{"sg"});
  const auto text = gavg_test::slurp(dir / "plot/sg_loglog.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "log10_k,log10_mean_gap,log10_direction_var");
  EXPECT_NE(text.find("\n0,"), std::string::npos);  // log10(1) = 0
  EXPECT_NE(text.find("\n2,"), std::string::npos);  // log10(100) = 2
}

TEST(PlotData, MissingDirectoryIsIoError) {
  EXPECT_THROW(gavg::plotdata("/nonexistent/gavg/run", "/tmp/gavg_never"), gavg::IoError);
}

}  // namespace
