#include "mra/spill.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

#include "mra/errors.hpp"

namespace mra {

std::string spill_path(const std::string& directory, std::size_t region) {
  return directory + "/atilde_" + std::to_string(region) + ".bin";
}

namespace {

void put(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void spill_store(const std::string& directory, std::size_t region, const AtildeSet& atilde) {
  const std::string path = spill_path(directory, region);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("region " + std::to_string(region) + ": cannot create spill file '" + path + "'");
  put(out, static_cast<std::uint64_t>(atilde.levels));
  put(out, atilde.blocks.size());
  for (const Matrix& b : atilde.blocks) {
    put(out, static_cast<std::uint64_t>(b.rows()));
    put(out, static_cast<std::uint64_t>(b.cols()));
  }
  put(out, atilde.omega.size());
  for (const Vector& w : atilde.omega) put(out, static_cast<std::uint64_t>(w.size()));
  for (const Matrix& b : atilde.blocks)
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size() * sizeof(double)));
  for (const Vector& w : atilde.omega)
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(w.size() * sizeof(double)));
  out.close();
  if (!out) throw IoError("region " + std::to_string(region) + ": failed writing spill file '" + path + "'");
}

AtildeSet spill_load(const std::string& directory, std::size_t region, bool keep_file) {
  const std::string path = spill_path(directory, region);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("region " + std::to_string(region) + ": cannot open spill file '" + path + "'");
  const auto fail = [&] {
    throw IoError("region " + std::to_string(region) + ": spill file '" + path + "' is truncated");
  };
  AtildeSet out;
  out.levels = static_cast<int>(get(in));
  const std::uint64_t blocks = get(in);
  if (!in || blocks > (1u << 20)) fail();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(blocks);
  for (auto& s : shapes) {
    s.first = get(in);
    s.second = get(in);
  }
  const std::uint64_t omegas = get(in);
  if (!in || omegas > (1u << 20)) fail();
  std::vector<std::uint64_t> lengths(omegas);
  for (auto& n : lengths) n = get(in);
  if (!in) fail();
  out.blocks.reserve(blocks);
  for (const auto& [rows, cols] : shapes) {
    Matrix b(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
    out.blocks.push_back(std::move(b));
  }
  out.omega.reserve(omegas);
  for (std::uint64_t n : lengths) {
    Vector w(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    out.omega.push_back(std::move(w));
  }
  if (!in) fail();
  in.close();
  if (!keep_file) std::remove(path.c_str());
  return out;
}

}  // namespace mra
