#include "nqs/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

namespace {

using nqs::Configuration;
using nqs::LabeledDataset;

TEST(LabelByDetuning, SplitsAtCriticalPointWithTieToOrdered) {
  std::map<double, std::vector<Configuration>> shots;
  shots[-1.0] = {Configuration{0, 0}, Configuration{0, 1}};
  shots[1.3] = {Configuration{1, 0}};
  shots[2.0] = {Configuration{1, 1}};

  const auto data = label_by_detuning(shots, 1.3);
  ASSERT_EQ(data.size(), 4u);
  EXPECT_EQ(data.records[0].label, 0);
  EXPECT_EQ(data.records[1].label, 0);
  EXPECT_EQ(data.records[2].label, 1);  // delta == delta_c counts as ordered
  EXPECT_EQ(data.records[3].label, 1);
}

TEST(LabelByDetuning, ExclusionWindowDropsAmbiguousDetunings) {
  std::map<double, std::vector<Configuration>> shots;
  for (double d : {-1.0, 0.9, 1.3, 1.8, 3.0}) shots[d] = {Configuration{0}};

  // |delta - delta_c| < window is dropped (delta_c itself included); the
  // boundary at exactly the window width stays.
  const auto dropped = label_by_detuning(shots, 1.3, 0.5, true);
  std::set<double> kept;
  for (const auto& r : dropped.records) kept.insert(r.delta);
  EXPECT_EQ(kept, (std::set<double>{-1.0, 1.8, 3.0}));

  const auto all = label_by_detuning(shots, 1.3, 0.5, false);
  EXPECT_EQ(all.size(), 5u);
}

LabeledDataset two_group_dataset(std::size_t n_a, std::size_t n_b) {
  LabeledDataset data;
  data.lx = 2;
  data.ly = 1;
  for (std::size_t i = 0; i < n_a; ++i) data.records.push_back({Configuration{0, 0}, 0, -1.0});
  for (std::size_t i = 0; i < n_b; ++i) data.records.push_back({Configuration{1, 1}, 1, 2.0});
  return data;
}

TEST(SplitDataset, StratifiedSharesWithinOneRecord) {
  const auto data = two_group_dataset(60, 41);
  const auto [train, test] = split_dataset(data, 0.25, 17);

  EXPECT_EQ(train.size() + test.size(), 101u);
  std::size_t test_a = 0, test_b = 0;
  for (const auto& r : test.records) (r.delta < 0 ? test_a : test_b)++;
  EXPECT_NEAR(static_cast<double>(test_a), 0.25 * 60, 1.0);
  EXPECT_NEAR(static_cast<double>(test_b), 0.25 * 41, 1.0);
}

TEST(SplitDataset, DeterministicInSeedAndDisjoint) {
  const auto data = two_group_dataset(20, 20);
  const auto [train1, test1] = split_dataset(data, 0.3, 5);
  const auto [train2, test2] = split_dataset(data, 0.3, 5);
  ASSERT_EQ(test1.size(), test2.size());
  for (std::size_t i = 0; i < test1.size(); ++i)
    EXPECT_EQ(test1.records[i].sigma, test2.records[i].sigma);

  // Membership is exclusive: multiset of all records is preserved.
  EXPECT_EQ(train1.size() + test1.size(), data.size());
  std::size_t ones = 0;
  for (const auto& r : train1.records) ones += r.label;
  for (const auto& r : test1.records) ones += r.label;
  EXPECT_EQ(ones, 20u);
}

TEST(BatchIterator, CoversEveryIndexOnceWithShortTail) {
  nqs::BatchIterator it(10, 3, 99);
  std::vector<std::size_t> batch;
  std::vector<std::size_t> seen;
  std::vector<std::size_t> sizes;
  while (it.next(batch)) {
    sizes.push_back(batch.size());
    seen.insert(seen.end(), batch.begin(), batch.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 1}));
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> want(10);
  std::iota(want.begin(), want.end(), 0u);
  EXPECT_EQ(seen, want);
  EXPECT_EQ(it.batches_per_epoch(), 4u);
}

TEST(BatchIterator, EpochsReshuffleDeterministically) {
  nqs::BatchIterator a(64, 8, 7), b(64, 8, 7);
  std::vector<std::size_t> ba, bb;
  a.start_epoch(3);
  b.start_epoch(3);
  a.next(ba);
  b.next(bb);
  EXPECT_EQ(ba, bb);

  b.start_epoch(4);
  b.next(bb);
  EXPECT_NE(ba, bb);
}

TEST(ShotFiles, ConfigurationsRoundTripWithMeta) {
  const auto dir = std::filesystem::temp_directory_path() / "nqs_data_io";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "shots.txt").string();

  std::vector<Configuration> shots{Configuration{0, 1, 1}, Configuration{1, 0, 0}};
  nqs::DatasetMeta meta{3, 3, 1, -0.75, 42};
  save_configurations(path, shots, meta);
  const auto [back, back_meta] = nqs::load_configurations(path);
  EXPECT_EQ(back, shots);
  EXPECT_EQ(back_meta.n_sites, 3);
  EXPECT_DOUBLE_EQ(back_meta.delta, -0.75);
  EXPECT_EQ(back_meta.seed, 42u);
  std::filesystem::remove_all(dir);
}

TEST(ShotFiles, MeasurementsKeepBasisPerRecord) {
  const auto dir = std::filesystem::temp_directory_path() / "nqs_meas_io";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "meas.txt").string();

  nqs::MeasurementDataset data;
  data.meta = {2, 2, 1, 0.0, 7};
  data.records.push_back({"XZ", Configuration{1, 0}});
  data.records.push_back({"ZY", Configuration{0, 0}});
  save_measurements(path, data);
  const auto back = nqs::load_measurements(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.records[0].basis, "XZ");
  EXPECT_EQ(back.records[1].basis, "ZY");
  EXPECT_EQ(back.records[0].outcome, (Configuration{1, 0}));
  std::filesystem::remove_all(dir);
}

TEST(ShotFiles, LabeledRowsRejectBadValues) {
  const auto dir = std::filesystem::temp_directory_path() / "nqs_label_io";
  std::filesystem::create_directories(dir);
  const auto good = (dir / "good.txt").string();

  LabeledDataset data = two_group_dataset(2, 1);
  save_labeled(good, data);
  const auto back = nqs::load_labeled(good);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.records[2].label, 1);
  EXPECT_DOUBLE_EQ(back.records[2].delta, 2.0);

  const auto bad = (dir / "bad.txt").string();
  std::FILE* f = std::fopen(bad.c_str(), "w");
  std::fputs("0 2 1 0.5\n", f);  // site value 2
  std::fclose(f);
  EXPECT_THROW(nqs::load_labeled(bad), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
