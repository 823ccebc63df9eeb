#pragma once

#include "edyn/grid.hpp"

#include <string>
#include <vector>

namespace edyn {

// Grid-snapshot binary format, version 1:
//   bytes  0..7   magic "EDYNGRID"
//   bytes  8..11  u32 version (1)
//   bytes 12..15  u32 plane count (1 = scalar field, 2 = complex re/im)
//   u64 dimension count
//   per axis: u64 points, f64 min, f64 max
//   planes, row-major f64 (axis 0 slowest)
// All integers and floats little-endian.
void write_snapshot(const std::string& path, const Grid& grid,
                    const std::vector<const ArrayXd*>& planes);

struct Snapshot {
  Grid grid;
  std::vector<ArrayXd> planes;
};

Snapshot read_snapshot(const std::string& path);

// CSV with a header row; values at full double precision (17 significant
// digits) for lossless round trips.
class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  ~CsvWriter();
  void row(const std::vector<double>& values);

private:
  struct Impl;
  Impl* impl_;
};

}  // namespace edyn
