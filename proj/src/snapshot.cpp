#include "edyn/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace edyn {

namespace {
constexpr char kMagic[8] = {'E', 'D', 'Y', 'N', 'G', 'R', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("snapshot: truncated file");
  return v;
}
}  // namespace

void write_snapshot(const std::string& path, const Grid& grid,
                    const std::vector<const ArrayXd*>& planes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path);
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(planes.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(grid.dim()));
  for (int a = 0; a < grid.dim(); ++a) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(grid.n(a)));
    put<double>(out, grid.xmin(a));
    put<double>(out, grid.xmax(a));
  }
  for (const ArrayXd* p : planes) {
    if (p->size() != grid.size())
      throw std::invalid_argument("snapshot: plane size mismatch");
    out.write(reinterpret_cast<const char*>(p->data()),
              static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("snapshot: bad magic in " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("snapshot: unsupported version");
  const auto nplanes = get<std::uint32_t>(in);
  const auto dim = static_cast<int>(get<std::uint64_t>(in));
  if (dim < 1 || dim > 2) throw std::runtime_error("snapshot: bad dimension");
  std::array<int, 2> n{1, 1};
  std::array<double, 2> mn{0.0, 0.0}, mx{1.0, 1.0};
  for (int a = 0; a < dim; ++a) {
    n[a] = static_cast<int>(get<std::uint64_t>(in));
    mn[a] = get<double>(in);
    mx[a] = get<double>(in);
  }
  Snapshot s;
  s.grid = Grid(dim, n, mn, mx);
  s.planes.resize(nplanes);
  for (auto& p : s.planes) {
    p.resize(s.grid.size());
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!in) throw std::runtime_error("snapshot: truncated data in " + path);
  }
  return s;
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns)
    : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) throw std::runtime_error("csv: cannot open " + path);
  for (std::size_t i = 0; i < columns.size(); ++i)
    impl_->out << (i ? "," : "") << columns[i];
  impl_->out << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<double>& values) {
  char buf[40];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    impl_->out << (i ? "," : "") << buf;
  }
  impl_->out << "\n";
}

}  // namespace edyn
