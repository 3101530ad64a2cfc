#pragma once

#include <map>

#include "resplat/geom.hpp"

namespace resplat {

struct BankEntry {
  std::string instance_id;
  Eigen::VectorXf embedding;  // stored verbatim; callers decide normalization
  std::string color, brand, model, car_type, asset_path;
};

struct Query {
  Eigen::VectorXf embedding;
  std::string color;
  OrientedBox3 source_box;
};

// Color-partitioned exact nearest-neighbor index over a dense embedding
// matrix.
struct MemoryBank {
  int dim = 0;
  std::vector<BankEntry> entries;
  struct Partition {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows;
    std::vector<int> entry_index;
  };
  std::map<std::string, Partition> by_color;

  bool empty() const { return entries.empty(); }
};

MemoryBank build_bank(std::vector<BankEntry> entries);

struct RetrievalHit {
  std::string instance_id;
  double distance;  // Euclidean
  int entry_index;
};

// Exact scan over the query's color partition (whole bank when the partition
// is empty); ascending distance, ties by instance_id.
std::vector<RetrievalHit> retrieve(const MemoryBank& bank, const Query& query, int k);

struct CropRect {
  int box_index = 0;   // reference into the input box list
  double x = 0, y = 0, w = 0, h = 0;  // pixel rectangle
  double area_px = 0;
};

// Projects boxes to masks, discards small crops and the smaller member of any
// overlapping pair (mask IoU > max_overlap).
std::vector<CropRect> select_crops(const Camera& camera,
                                   const std::vector<OrientedBox3>& boxes,
                                   double min_area_px = 900, double max_overlap = 0.3);

// Bank directory layout: manifest.jsonl (one entry per line), embeddings.bin
// (raw f32 little-endian row-major), embeddings.json ({"rows": R, "dim": D}).
void save_bank(const std::string& dir, const std::vector<BankEntry>& entries);
MemoryBank load_bank(const std::string& dir);

}  // namespace resplat
