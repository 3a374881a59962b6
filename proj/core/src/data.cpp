#include "nqs/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nqs/rng.hpp"

namespace nqs {

LabeledDataset label_by_detuning(
    const std::map<double, std::vector<Configuration>>& shots_by_delta,
    double delta_c, double exclusion_window, bool drop_window) {
  LabeledDataset out;
  for (const auto& [delta, shots] : shots_by_delta) {
    if (drop_window && std::abs(delta - delta_c) < exclusion_window) continue;
    const int label = delta >= delta_c ? 1 : 0;
    for (const auto& sigma : shots) out.records.push_back({sigma, label, delta});
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& data,
                                                        double test_fraction,
                                                        std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0)
    throw std::invalid_argument("test_fraction must lie in [0, 1]");

  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.records.size(); ++i)
    groups[data.records[i].delta].push_back(i);

  // Largest-remainder allocation keeps each group's test share within one
  // record of the requested fraction.
  std::vector<std::size_t> test_idx, train_idx;
  Rng rng(derive_seed(seed, 0x5b17));
  for (auto& [delta, idx] : groups) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? test_idx : train_idx).push_back(idx[i]);
  }
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  LabeledDataset train{{}, data.lx, data.ly}, test{{}, data.lx, data.ly};
  train.records.reserve(train_idx.size());
  test.records.reserve(test_idx.size());
  for (auto i : train_idx) train.records.push_back(data.records[i]);
  for (auto i : test_idx) test.records.push_back(data.records[i]);
  return {std::move(train), std::move(test)};
}

BatchIterator::BatchIterator(std::size_t n_records, std::size_t batch_size, std::uint64_t seed)
    : n_(n_records), batch_size_(batch_size), seed_(seed), order_(n_records) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  start_epoch(0);
}

void BatchIterator::start_epoch(int epoch) {
  cursor_ = 0;
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng.uniform_int(i)]);
}

bool BatchIterator::next(std::vector<std::size_t>& batch) {
  if (cursor_ >= n_) return false;
  const std::size_t end = std::min(cursor_ + batch_size_, n_);
  batch.assign(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return true;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (n_ + batch_size_ - 1) / batch_size_;
}

namespace {

void write_meta(std::ofstream& out, const DatasetMeta& meta) {
  out << "# n_sites=" << meta.n_sites << "\n"
      << "# lx=" << meta.lx << "\n"
      << "# ly=" << meta.ly << "\n"
      << "# delta=" << meta.delta << "\n"
      << "# seed=" << meta.seed << "\n";
}

DatasetMeta parse_meta_line(const std::string& line, DatasetMeta meta) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) return meta;
  const std::string key = line.substr(2, eq - 2);
  const std::string value = line.substr(eq + 1);
  if (key == "n_sites") meta.n_sites = std::stoi(value);
  else if (key == "lx") meta.lx = std::stoi(value);
  else if (key == "ly") meta.ly = std::stoi(value);
  else if (key == "delta") meta.delta = std::stod(value);
  else if (key == "seed") meta.seed = std::stoull(value);
  return meta;
}

Configuration parse_bits(std::istringstream& ss, const std::string& path) {
  Configuration sigma;
  int b;
  while (ss >> b) {
    if (b != 0 && b != 1) throw std::runtime_error("non-binary site value in " + path);
    sigma.bits.push_back(static_cast<std::uint8_t>(b));
  }
  return sigma;
}

}  // namespace

void save_configurations(const std::string& path, const std::vector<Configuration>& configs,
                         const DatasetMeta& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  write_meta(out, meta);
  for (const auto& sigma : configs) {
    for (std::size_t j = 0; j < sigma.size(); ++j)
      out << (j ? " " : "") << static_cast<int>(sigma.bits[j]);
    out << "\n";
  }
}

std::pair<std::vector<Configuration>, DatasetMeta> load_configurations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<Configuration> configs;
  DatasetMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      meta = parse_meta_line(line, meta);
      continue;
    }
    std::istringstream ss(line);
    Configuration sigma = parse_bits(ss, path);
    if (!configs.empty() && sigma.size() != configs.front().size())
      throw std::runtime_error("inconsistent row lengths in " + path);
    configs.push_back(std::move(sigma));
  }
  return {std::move(configs), meta};
}

void save_measurements(const std::string& path, const MeasurementDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  write_meta(out, data.meta);
  for (const auto& rec : data.records) {
    out << rec.basis;
    for (std::uint8_t b : rec.outcome.bits) out << " " << static_cast<int>(b);
    out << "\n";
  }
}

MeasurementDataset load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  MeasurementDataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      data.meta = parse_meta_line(line, data.meta);
      continue;
    }
    std::istringstream ss(line);
    MeasurementRecord rec;
    if (!(ss >> rec.basis)) throw std::runtime_error("malformed measurement row in " + path);
    rec.outcome = parse_bits(ss, path);
    if (rec.outcome.size() != rec.basis.size())
      throw std::runtime_error("basis/outcome length mismatch in " + path);
    data.records.push_back(std::move(rec));
  }
  return data;
}

void save_labeled(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  out << "# lx=" << data.lx << "\n# ly=" << data.ly << "\n";
  for (const auto& rec : data.records) {
    for (std::uint8_t b : rec.sigma.bits) out << static_cast<int>(b) << " ";
    out << rec.label << " " << rec.delta << "\n";
  }
}

LabeledDataset load_labeled(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  LabeledDataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        const std::string key = line.substr(2, eq - 2);
        if (key == "lx") data.lx = std::stoi(line.substr(eq + 1));
        else if (key == "ly") data.ly = std::stoi(line.substr(eq + 1));
      }
      continue;
    }
    std::istringstream ss(line);
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() < 3) throw std::runtime_error("malformed labeled row in " + path);
    LabeledRecord rec;
    rec.delta = values.back();
    rec.label = static_cast<int>(values[values.size() - 2]);
    if (rec.label != 0 && rec.label != 1)
      throw std::runtime_error("label must be 0 or 1 in " + path);
    for (std::size_t j = 0; j + 2 < values.size(); ++j) {
      if (values[j] != 0.0 && values[j] != 1.0)
        throw std::runtime_error("non-binary site value in " + path);
      rec.sigma.bits.push_back(static_cast<std::uint8_t>(values[j]));
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace nqs
