#include <gtest/gtest.h>

#include <filesystem>

#include "cellbp/io.hpp"
#include "fixtures.hpp"

using namespace cellbp;
namespace fs = std::filesystem;
using cellbp::testing::config1;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cellbp_io_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 312.77812345678, 1e-300, 2.5e17}) {
    EXPECT_EQ(std::stod(io::fmt(v)), v);
  }
  EXPECT_EQ(io::fmt(0.5), "0.5");
  EXPECT_EQ(io::fmt(std::nan("")), "NA");
}

TEST(Params, JsonRoundTripAndErrors) {
  const auto p = config1();
  const auto j = io::params_to_json(p);
  EXPECT_EQ(j.dump(), io::params_to_json(io::params_from_json(j)).dump());
  auto missing = j;
  missing.erase("c4");
  try {
    io::params_from_json(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidParams);
    EXPECT_NE(std::string(e.what()).find("c4"), std::string::npos);
  }
  auto bad = j;
  bad["p4"] = 0.5;
  try {
    io::params_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("p1 + p2 + p4"), std::string::npos);
  }
}

TEST(Params, LoadsFitResults) {
  FitResult fr;
  fr.theta_hat = ThetaVector::from_params(config1());
  const auto path = scratch("fit.json");
  io::write_text_atomic(path, io::dump(io::fit_result_to_json(fr, "full", 200)));
  const auto p = io::load_params(path);
  EXPECT_EQ(p.s0, 200);
  EXPECT_EQ(p.lor2.m, 12.0);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST(Csv, TrajectoryRoundTrip) {
  const auto traj = simulate(config1(30), 4);
  const auto path = scratch("rep.csv");
  io::write_text_atomic(path, io::trajectory_csv(traj));
  EXPECT_EQ(io::detect_schema(path), io::CsvSchema::Full);
  const auto back = io::read_trajectory_csv(path, 30);
  ASSERT_EQ(back.size(), traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_EQ(back.events[i].t, traj.events[i].t);
    EXPECT_EQ(back.events[i].kind, traj.events[i].kind);
  }
  EXPECT_THROW(io::read_partial_csv(path, 30), Error);
}

TEST(Csv, PartialRoundTripAndSchemaErrors) {
  const auto pt = project_partial(simulate(config1(30), 4));
  const auto path = scratch("part.csv");
  io::write_text_atomic(path, io::partial_csv(pt));
  EXPECT_EQ(io::detect_schema(path), io::CsvSchema::Partial);
  const auto back = io::read_partial_csv(path, 30);
  ASSERT_EQ(back.size(), pt.size());
  EXPECT_EQ(back.records.back().m, pt.records.back().m);
  EXPECT_THROW(io::read_trajectory_csv(path, 30), Error);

  const auto odd = scratch("odd.csv");
  io::write_text_atomic(odd, "time,x\n1,2\n");
  EXPECT_THROW(io::detect_schema(odd), Error);
  io::write_text_atomic(odd, "t,dx,dy,dz\n1.0,2,0,0\n");
  try {
    io::read_trajectory_csv(odd, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedObservation);
  }
  io::write_text_atomic(odd, "t,dx,dy,dz\nabc,1,0,0\n");
  EXPECT_THROW(io::read_trajectory_csv(odd, 3), Error);
  EXPECT_THROW(io::read_text(scratch("does_not_exist.csv")), Error);
}

TEST(Csv, EmptyProcessWritesHeaderOnly) {
  EXPECT_EQ(io::trajectory_csv(Trajectory{0, {}}), "t,dx,dy,dz\n");
}

TEST(FitConfigJson, ParsesOverridesAndPins) {
  const auto j = io::json::parse(R"({"population": 20, "generations": 50, "F": 0.7, "CR": 0.8, "seed": 9,
                                      "bounds": {"c1": [1e-5, 2]}, "pins": {"p4": 0}})");
  const auto cfg = io::fit_config_from_json(j);
  EXPECT_EQ(cfg.de.population, 20u);
  EXPECT_EQ(cfg.de.generations, 50u);
  EXPECT_EQ(cfg.de.mutation, 0.7);
  EXPECT_EQ(cfg.de.seed, 9u);
  EXPECT_EQ(cfg.bounds.upper[kC1], 2.0);
  ASSERT_TRUE(cfg.pins[kP4].has_value());
  EXPECT_EQ(*cfg.pins[kP4], 0.0);
  EXPECT_THROW(io::fit_config_from_json(io::json::parse(R"({"bounds": {"q": [0, 1]}})")), Error);
  EXPECT_THROW(io::fit_config_from_json(io::json::parse(R"({"population": 2})")), Error);
  const auto round = io::fit_config_from_json(io::fit_config_to_json(cfg));
  EXPECT_EQ(round.de.crossover, cfg.de.crossover);
}

TEST(FitResultJson, ReportsBoundsPinsAndTrace) {
  FitResult fr;
  fr.theta_hat = ThetaVector::from_params(config1());
  fr.pins[kR] = 0.2;
  fr.bounds = BoxBounds{}.resolved(40.0);
  fr.trace = {1.0, 2.0, 3.0};
  const auto j = io::fit_result_to_json(fr, "forward", 200);
  EXPECT_EQ(j["mode"], "forward");
  EXPECT_EQ(j["trace_length"], 3);
  EXPECT_EQ(j["pins"]["r"], 0.2);
  EXPECT_FALSE(j["bounds"].contains("r"));
  EXPECT_EQ(j["bounds"]["m1"][1], 60.0);
  EXPECT_EQ(j["estimate"]["p1"], 0.55);
}
