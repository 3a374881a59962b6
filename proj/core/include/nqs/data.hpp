#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nqs/lattice.hpp"

namespace nqs {

// Provenance carried alongside stored shot data.
struct DatasetMeta {
  int n_sites = 0;
  int lx = 0;
  int ly = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
};

// One projective measurement: basis string (letter per site) and outcome.
struct MeasurementRecord {
  std::string basis;
  Configuration outcome;
};

struct MeasurementDataset {
  std::vector<MeasurementRecord> records;
  DatasetMeta meta;

  std::size_t size() const { return records.size(); }
};

struct LabeledRecord {
  Configuration sigma;
  int label;     // 0 = disordered, 1 = ordered
  double delta;  // detuning the shot was drawn at
};

struct LabeledDataset {
  std::vector<LabeledRecord> records;
  int lx = 0;
  int ly = 0;

  std::size_t size() const { return records.size(); }
};

// Labels shots by which side of delta_c their detuning falls on (ties go to
// the ordered side). Shots with |delta - delta_c| < exclusion_window are
// dropped when drop_window is set, so the classifier never trains on the
// ambiguous region.
LabeledDataset label_by_detuning(
    const std::map<double, std::vector<Configuration>>& shots_by_delta,
    double delta_c, double exclusion_window = 0.0, bool drop_window = true);

// Seeded shuffle split, stratified by detuning; the test share of every
// detuning group is within one record of test_fraction.
std::pair<LabeledDataset, LabeledDataset> split_dataset(
    const LabeledDataset& data, double test_fraction, std::uint64_t seed);

// Minibatch index stream. Each epoch reshuffles with a seed derived from
// (seed, epoch); the final short batch is kept.
class BatchIterator {
 public:
  BatchIterator(std::size_t n_records, std::size_t batch_size, std::uint64_t seed);

  void start_epoch(int epoch);
  // Fills `batch` with the next indices; false once the epoch is exhausted.
  bool next(std::vector<std::size_t>& batch);
  std::size_t batches_per_epoch() const;

 private:
  std::size_t n_ = 0;
  std::size_t batch_size_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

// Shot files are text: '# key=value' header lines, then one row of N 0/1
// site values per shot. Measurement files prepend the basis string to each
// row. Label files carry 'sigma... label delta' rows.
void save_configurations(const std::string& path, const std::vector<Configuration>& configs,
                         const DatasetMeta& meta);
std::pair<std::vector<Configuration>, DatasetMeta> load_configurations(const std::string& path);

void save_measurements(const std::string& path, const MeasurementDataset& data);
MeasurementDataset load_measurements(const std::string& path);

void save_labeled(const std::string& path, const LabeledDataset& data);
LabeledDataset load_labeled(const std::string& path);

}  // namespace nqs
