#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "fedkan/fedkan.hpp"
#include "test_util.hpp"

using namespace fedkan;

namespace {

std::string csv_rows(std::size_t hours, const std::string& shares = "0.25,0.25,0.25,0.25") {
  std::string s = std::string(kCsvHeader) + "\n";
  for (std::size_t h = 0; h < hours; ++h) {
    s += std::to_string(h) + "," + std::to_string(100 + h) + "," + std::to_string(10 + h) + "," +
         shares + "\n";
  }
  return s;
}

BeamSeries series_from(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "fixture");
}

}  // namespace

TEST(LoadCsv, WellFormedFile) {
  testutil::TempDir dir;
  testutil::write_file(dir / "beam_a.csv", csv_rows(743));
  const auto s = load_csv(dir / "beam_a.csv");
  EXPECT_EQ(s.size(), 743u);
  EXPECT_EQ(s.beam_id, "beam_a");
  for (const auto& r : s.records) {
    double sum = 0.0;
    for (double v : r.shares) sum += v;
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(LoadCsv, RejectsBadSharesWithLineNumber) {
  std::string text = csv_rows(6);
  // Line 4 (hour 2) sums to 0.90.
  const std::string good = "2,102,12,0.25,0.25,0.25,0.25";
  text.replace(text.find(good), good.size(), "2,102,12,0.20,0.25,0.20,0.25");
  try {
    series_from(text);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line(s) 4"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, RenormalizesWithinTolerance) {
  const auto s = series_from(csv_rows(3, "0.25,0.25,0.25,0.2505"));
  double sum = 0.0;
  for (double v : s.records[0].shares) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(LoadCsv, IngestionErrors) {
  EXPECT_THROW(series_from("hour,downlink,uplink,communication,streaming,cloud_services\n0,1,1,1,0,0\n"),
               IngestionError);
  std::string gap = std::string(kCsvHeader) + "\n0,1,1,0.25,0.25,0.25,0.25\n2,1,1,0.25,0.25,0.25,0.25\n";
  EXPECT_THROW(series_from(gap), IngestionError);
  std::string nan = std::string(kCsvHeader) + "\n0,nan,1,0.25,0.25,0.25,0.25\n";
  EXPECT_THROW(series_from(nan), IngestionError);
  std::string junk = std::string(kCsvHeader) + "\n0,abc,1,0.25,0.25,0.25,0.25\n";
  EXPECT_THROW(series_from(junk), IngestionError);
  EXPECT_THROW(load_csv("/nonexistent/beam.csv"), IoError);
}

TEST(LoadCsv, WriteThenReadIsIdentity) {
  const auto beam = generate_synthetic(3, 50, default_profile(1));
  std::ostringstream os;
  write_csv(os, beam);
  std::istringstream in(os.str());
  EXPECT_EQ(read_csv(in, beam.beam_id), beam);
}

TEST(Synthetic, DeterministicAndNormalized) {
  const auto a = generate_synthetic(11, 200, default_profile(0));
  EXPECT_EQ(a, generate_synthetic(11, 200, default_profile(0)));
  EXPECT_NE(a, generate_synthetic(12, 200, default_profile(0)));
  for (const auto& r : a.records) {
    double sum = 0.0;
    for (double v : r.shares) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_GE(r.downlink, 0.0);
    EXPECT_GE(r.uplink, 0.0);
  }
}

TEST(Synthetic, BeamsHaveDistinctMeans) {
  std::vector<double> means;
  for (int b = 0; b < 4; ++b) {
    const auto s = generate_synthetic(beam_seed(7, b), 743, default_profile(b));
    double m = 0.0;
    for (const auto& r : s.records) m += r.downlink;
    means.push_back(m / 743.0);
  }
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = i + 1; j < means.size(); ++j) EXPECT_GT(std::abs(means[i] - means[j]), 0.0);
}

TEST(Windows, LengthLaw) {
  const auto s = generate_synthetic(1, 743, default_profile(0));
  EXPECT_EQ(make_windows(s, 5).size(), 738u);
  for (std::size_t w : {1u, 3u, 24u}) EXPECT_EQ(make_windows(s, w).size(), 743u - w);
  BeamSeries six = s;
  six.records.resize(6);
  EXPECT_EQ(make_windows(six, 5).size(), 1u);
  six.records.resize(5);
  EXPECT_THROW(make_windows(six, 5), ConfigError);
}

TEST(Windows, IndexingContract) {
  const auto s = generate_synthetic(1, 20, default_profile(0));
  const auto w = make_windows(s, 5);
  ASSERT_EQ(w[0].features.size(), 10u);
  for (std::size_t h = 0; h < 5; ++h) {
    EXPECT_EQ(w[0].features[2 * h], s.records[h].downlink);
    EXPECT_EQ(w[0].features[2 * h + 1], s.records[h].uplink);
  }
  EXPECT_EQ(w[0].target, s.records[5].shares);
  EXPECT_EQ(w[3].target, s.records[8].shares);
}

TEST(Split, DefaultSizes) {
  std::vector<int> idx(738);
  std::iota(idx.begin(), idx.end(), 0);
  auto s = chrono_split(idx, 0.8);
  EXPECT_EQ(s.train.size(), 590u);
  EXPECT_EQ(s.test.size(), 148u);
  EXPECT_LT(s.train.back(), s.test.front());
  std::vector<int> joined = s.train;
  joined.insert(joined.end(), s.test.begin(), s.test.end());
  EXPECT_EQ(joined, idx);
  auto ten = chrono_split(std::vector<int>(10), 0.8);
  EXPECT_EQ(ten.train.size(), 8u);
  EXPECT_EQ(ten.test.size(), 2u);
}

TEST(Split, RejectsEmptySide) {
  EXPECT_THROW(chrono_split(std::vector<int>(3), 0.2), ConfigError);
  EXPECT_THROW(chrono_split(std::vector<int>(3), 1.0), ConfigError);
  EXPECT_THROW(chrono_split(std::vector<int>(3), 0.0), ConfigError);
}

TEST(Scaler, FitSetMapsIntoUnitInterval) {
  const auto w = make_windows(generate_synthetic(2, 300, default_profile(2)), 5);
  const auto scaled = apply_scaler(fit_scaler(w), w);
  for (const auto& s : scaled)
    for (double v : s.features) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_EQ(scaled[7].target, w[7].target);
}

TEST(Scaler, ConstantFeatureMapsToZero) {
  std::vector<WindowedSample> w(3);
  for (std::size_t j = 0; j < 3; ++j) w[j].features = {5.0, static_cast<double>(j)};
  const auto scaled = apply_scaler(fit_scaler(w), w);
  for (const auto& s : scaled) EXPECT_EQ(s.features[0], 0.0);
}

TEST(Scaler, TestValuesAboveRangeExceedOne) {
  std::vector<WindowedSample> train(2), test(1);
  train[0].features = {0.0};
  train[1].features = {10.0};
  test[0].features = {15.0};
  const auto scaled = apply_scaler(fit_scaler(train), test);
  EXPECT_DOUBLE_EQ(scaled[0].features[0], 1.5);
  // The spline layer clamps it to the grid edge.
  SplineGrid g(-1, 1, 5, 3);
  EXPECT_EQ(bspline_basis(scaled[0].features[0], g), bspline_basis(1.0, g));
}

TEST(Scaler, LeakageTripwire) {
  // Fixture where the test split extends the feature range.
  BeamSeries s = generate_synthetic(5, 100, default_profile(0));
  for (std::size_t h = 90; h < 100; ++h) s.records[h].downlink *= 10.0;
  auto split = chrono_split(make_windows(s, 5), 0.8);
  auto all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  const auto client = fedkan::prepare_client(s, 5, 0.8);
  EXPECT_EQ(client.scaler, fit_scaler(split.train));
  EXPECT_NE(client.scaler, fit_scaler(all));
}
