#include "nqs/io.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

namespace nqs {

namespace {

constexpr char kMagic[8] = {'N', 'Q', 'S', 'C', 'K', 'P', 'T', '\1'};

template <class T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return value;
}

}  // namespace

std::size_t NamedArray::n_values() const {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

void save_checkpoint(const std::string& path, const std::vector<NamedArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, static_cast<std::int64_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.n_values() != a.values.size())
      throw std::invalid_argument("array dims do not match value count: " + a.name);
    write_pod(out, static_cast<std::int64_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    write_pod(out, static_cast<std::int64_t>(a.dims.size()));
    for (auto d : a.dims) write_pod(out, d);
    out.write(reinterpret_cast<const char*>(a.values.data()),
              static_cast<std::streamsize>(a.values.size() * sizeof(double)));
  }
}

std::vector<NamedArray> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw std::runtime_error("not a checkpoint file: " + path);

  const auto count = read_pod<std::int64_t>(in, path);
  if (count < 0 || count > 1'000'000) throw std::runtime_error("corrupt checkpoint: " + path);
  std::vector<NamedArray> arrays;
  arrays.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    NamedArray a;
    const auto name_len = read_pod<std::int64_t>(in, path);
    if (name_len < 0 || name_len > 4096) throw std::runtime_error("corrupt checkpoint: " + path);
    a.name.resize(static_cast<std::size_t>(name_len));
    in.read(a.name.data(), name_len);
    const auto ndim = read_pod<std::int64_t>(in, path);
    if (ndim < 0 || ndim > 16) throw std::runtime_error("corrupt checkpoint: " + path);
    a.dims.resize(static_cast<std::size_t>(ndim));
    for (auto& d : a.dims) d = read_pod<std::int64_t>(in, path);
    a.values.resize(a.n_values());
    in.read(reinterpret_cast<char*>(a.values.data()),
            static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw std::runtime_error("checkpoint is missing array: " + name);
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw std::invalid_argument("csv row width does not match header");
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
}

void write_key_values(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& [key, value] : kv) out << key << "=" << value << "\n";
}

std::map<std::string, std::string> read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace nqs
