#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "radau_ep/convergence.hpp"

using namespace radau_ep;

namespace {

Sample sample(double s, double alpha) {
  Sample p;
  p.S = SymTensor2::diagonal(s, 2 * s, -s);
  p.E = SymTensor2::diagonal(1e-3 * s, 0, 0);
  p.Ep = SymTensor2::diagonal(1e-4 * s, -1e-4 * s, 0);
  p.alpha = alpha;
  return p;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("radau_ep_test_" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(RelativeError, IdenticalRunsGiveZero) {
  const std::vector<Sample> a = {sample(1.0, 0.1), sample(3.0, 0.2)};
  EXPECT_EQ(relative_error(a, a, Quantity::S), 0.0);
}

TEST(RelativeError, ScaledRunGivesScaleDeviation) {
  const std::vector<Sample> ref = {sample(1.0, 0.1), sample(3.0, 0.2)};
  const std::vector<Sample> run = {sample(1.01, 0.1), sample(3.03, 0.2)};
  EXPECT_NEAR(relative_error(run, ref, Quantity::S), 0.01, 1e-14);
  EXPECT_NEAR(relative_error(run, ref, Quantity::Ep), 0.01, 1e-14);
}

TEST(RelativeError, OnlyPlasticReferencePointsCount) {
  const std::vector<Sample> ref = {sample(1.0, 0.1), sample(3.0, 0.0)};
  const std::vector<Sample> run = {sample(1.02, 0.1), sample(6.0, 0.0)};
  const ErrorValue ev = relative_error_detail(run, ref, Quantity::S);
  EXPECT_EQ(ev.n_points, 1);
  EXPECT_NEAR(ev.value, 0.02, 1e-14);
}

TEST(RelativeError, ZeroReferenceIsExcluded) {
  std::vector<Sample> ref = {sample(1.0, 0.1), sample(0.0, 0.1)};
  const std::vector<Sample> run = {sample(1.0, 0.1), sample(1.0, 0.1)};
  const ErrorValue ev = relative_error_detail(run, ref, Quantity::S);
  EXPECT_EQ(ev.n_points, 1);
  EXPECT_EQ(ev.n_excluded, 1);
  EXPECT_EQ(ev.value, 0.0);
}

TEST(RelativeError, MismatchedRunsThrow) {
  EXPECT_THROW(relative_error({sample(1, 1)}, {}, Quantity::S), InvalidArgument);
}

TEST(FitOrder, RecoversPowerLaw) {
  std::vector<std::pair<double, double>> rows;
  for (double dt = 0.5; dt > 0.01; dt /= 2) rows.emplace_back(dt, 3.7 * std::pow(dt, 2.5));
  const OrderFit f = fit_order(rows);
  EXPECT_NEAR(f.order, 2.5, 1e-12);
  EXPECT_NEAR(std::pow(10.0, f.intercept), 3.7, 1e-10);
  EXPECT_EQ(f.n_used, static_cast<int>(rows.size()));
}

TEST(FitOrder, DropsPlateauRows) {
  const std::vector<std::pair<double, double>> rows = {
      {1.0, 1e-3}, {0.5, 1e-4}, {0.25, 1e-5}, {0.125, 1e-14}, {0.0625, 0.0}};
  const OrderFit f = fit_order(rows);
  EXPECT_EQ(f.n_used, 3);
  EXPECT_EQ(f.n_excluded, 2);
  EXPECT_NEAR(f.order, std::log10(10.0) / std::log10(2.0), 1e-12);
}

TEST(FitOrder, NeedsThreeRows) {
  EXPECT_THROW(fit_order({{1.0, 1e-3}, {0.5, 1e-4}}), InsufficientData);
  EXPECT_THROW(fit_order({{1.0, 1e-3}, {1.0, 1e-3}, {1.0, 1e-3}}), InsufficientData);
}

TEST(TimeToTolerance, InterpolatesLogLog) {
  const std::vector<ConvergenceRow> rows = {{1.0, 1e-2, 1.0}, {0.5, 1e-3, 4.0}, {0.25, 1e-4, 16.0}};
  EXPECT_NEAR(*time_to_tolerance(rows, 1e-3), 4.0, 1e-12);
  EXPECT_NEAR(*time_to_tolerance(rows, std::sqrt(1e-3 * 1e-4)), 8.0, 1e-12);
  EXPECT_NEAR(*time_to_tolerance(rows, 1.0), 1.0, 1e-12);
  EXPECT_FALSE(time_to_tolerance(rows, 1e-6));
}

TEST(Speedup, RatioOfTimes) {
  ConvergenceReport be, m;
  be.rows = {{1.0, 1e-2, 1.0}, {0.5, 5e-3, 2.0}, {0.25, 2.5e-3, 4.0}};
  m.rows = {{1.0, 1e-2, 0.5}, {0.5, 1e-3, 1.0}, {0.25, 1e-4, 2.0}};
  EXPECT_NEAR(*speedup(be, m, 2.5e-3), 4.0 / 0.5 * std::pow(2.0, -std::log(4.0) / std::log(10.0)),
              1e-12);
  EXPECT_FALSE(speedup(be, m, 1e-4));
}

TEST(ReferenceCache, TrajectoryRoundTrip) {
  Trajectory tr;
  tr.times = {0.5, 1.0 / 3.0};
  tr.samples = {{sample(1.0 / 7.0, 0.1), sample(2.0, 0.0)}, {sample(M_PI, 1e-300)}};
  std::stringstream ss;
  write_trajectory(ss, "k", tr);
  const auto back = read_trajectory(ss, "k");
  ASSERT_TRUE(back);
  EXPECT_EQ(back->times, tr.times);
  for (std::size_t k = 0; k < tr.samples.size(); ++k)
    for (std::size_t i = 0; i < tr.samples[k].size(); ++i) {
      EXPECT_EQ(back->samples[k][i].S.vec(), tr.samples[k][i].S.vec());
      EXPECT_EQ(back->samples[k][i].alpha, tr.samples[k][i].alpha);
    }
  std::stringstream other(ss.str());
  EXPECT_FALSE(read_trajectory(other, "different-key"));
}

TEST(ReferenceCache, KeyTracksInputs) {
  Scenario a = find_scenario("case_II");
  Scenario b = a;
  b.params = MaterialParams(700000.0, 0.0, 876.0, 211.0, 1500.0, 300.0);
  EXPECT_NE(reference_hash(a), reference_hash(b));
  b = a;
  b.ref_dt = 2e-4;
  EXPECT_NE(reference_hash(a), reference_hash(b));
  EXPECT_EQ(reference_hash(a), reference_hash(find_scenario("case_II")));
}

TEST(ReferenceCache, SecondCallLoadsFromDisk) {
  Scenario sc = find_scenario("case_II");
  sc.ref_dt = 1e-3;
  const auto dir = scratch_dir("cache");
  ReferenceInfo first, second;
  const Trajectory a = reference_solution(sc, dir, &first);
  const Trajectory b = reference_solution(sc, dir, &second);
  EXPECT_FALSE(first.from_cache);
  EXPECT_TRUE(second.from_cache);
  EXPECT_TRUE(std::filesystem::exists(first.path));
  EXPECT_EQ(a.samples[0][0].Ep.vec(), b.samples[0][0].Ep.vec());
  std::filesystem::remove_all(dir);
}

TEST(ReferenceCache, CorruptFileIsRecomputed) {
  Scenario sc = find_scenario("case_II");
  sc.ref_dt = 1e-3;
  const auto dir = scratch_dir("corrupt");
  ReferenceInfo info;
  reference_solution(sc, dir, &info);
  {
    std::ofstream out(info.path);
    out << "radau-ep-reference " << reference_key(sc) << "\nt 1 1\n0 0 garbage\n";
  }
  ReferenceInfo again;
  const Trajectory tr = reference_solution(sc, dir, &again);
  EXPECT_FALSE(again.from_cache);
  EXPECT_GT(tr.samples[0][0].alpha, 0.0);
  std::filesystem::remove_all(dir);
}

TEST(ConvergenceStudy, BackwardEulerIsFirstOrderOnSimpleShear) {
  const Scenario sc = find_scenario("simple_shear");
  const Trajectory ref = run_scenario(sc, make_method("RIIa-q-SP", 3), 0.0625);
  const auto reps = convergence_study(sc, make_method("BE", 1), ref, Quantity::S, {4, 2, 1, 0.5});
  ASSERT_EQ(reps.size(), 3u);
  for (const auto& r : reps) {
    ASSERT_TRUE(r.fit);
    EXPECT_NEAR(r.fit->order, 1.0, 0.15) << "t=" << r.eval_time;
    EXPECT_EQ(r.n_points, 8);
  }
}
