#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nqs {

// Named double arrays with shapes, stored as a little-endian binary
// checkpoint ('NQSCKPT' magic). Complex parameters are stored through their
// interleaved real view.
struct NamedArray {
  std::string name;
  std::vector<std::int64_t> dims;
  std::vector<double> values;

  std::size_t n_values() const;
};

void save_checkpoint(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_checkpoint(const std::string& path);

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name);

// Plot-ready CSV: one header row, fixed 17-digit precision, '\n' endings.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

// Sorted key=value text, used for run manifests. Rewriting the same map
// yields byte-identical files.
void write_key_values(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_key_values_file(const std::string& path);

}  // namespace nqs
