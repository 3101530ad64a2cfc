#include "resplat/retrieval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace resplat {

using json = nlohmann::json;

MemoryBank build_bank(std::vector<BankEntry> entries) {
  MemoryBank bank;
  if (entries.empty()) return bank;
  bank.dim = static_cast<int>(entries[0].embedding.size());
  for (const BankEntry& e : entries)
    if (e.embedding.size() != bank.dim)
      throw std::runtime_error("build_bank: embedding dimension mismatch for " +
                               e.instance_id);
  std::map<std::string, std::vector<int>> groups;
  for (size_t i = 0; i < entries.size(); ++i)
    groups[entries[i].color].push_back(static_cast<int>(i));
  for (auto& [color, idx] : groups) {
    MemoryBank::Partition part;
    part.rows.resize(static_cast<Eigen::Index>(idx.size()), bank.dim);
    part.entry_index = idx;
    for (size_t r = 0; r < idx.size(); ++r)
      part.rows.row(static_cast<Eigen::Index>(r)) = entries[idx[r]].embedding.transpose();
    bank.by_color.emplace(color, std::move(part));
  }
  bank.entries = std::move(entries);
  return bank;
}

std::vector<RetrievalHit> retrieve(const MemoryBank& bank, const Query& query, int k) {
  if (k < 1) throw std::runtime_error("retrieve: k must be >= 1");
  if (bank.empty()) throw std::runtime_error("retrieve: empty bank");
  if (query.embedding.size() != bank.dim)
    throw std::runtime_error("retrieve: query dimension mismatch");

  const MemoryBank::Partition* part = nullptr;
  auto it = bank.by_color.find(query.color);
  if (it != bank.by_color.end() && it->second.entry_index.size() > 0) part = &it->second;

  std::vector<RetrievalHit> hits;
  auto scan = [&](const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                      Eigen::RowMajor>& rows,
                  const std::vector<int>& index) {
    Eigen::VectorXf q = query.embedding;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      double d = (rows.row(r).transpose() - q).norm();
      hits.push_back({bank.entries[index[r]].instance_id, d, index[r]});
    }
  };
  if (part) {
    scan(part->rows, part->entry_index);
  } else {
    for (const auto& [color, p] : bank.by_color) scan(p.rows, p.entry_index);
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.instance_id < b.instance_id;
  });
  if (static_cast<int>(hits.size()) > k) hits.resize(k);
  return hits;
}

std::vector<CropRect> select_crops(const Camera& camera,
                                   const std::vector<OrientedBox3>& boxes,
                                   double min_area_px, double max_overlap) {
  struct Cand {
    int box_index;
    ImageU8 mask;
    double area;
    CropRect rect;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < boxes.size(); ++i) {
    ImageU8 mask = box_to_mask(camera, boxes[i]);
    double area = 0;
    int x0 = camera.width, x1 = -1, y0 = camera.height, y1 = -1;
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x)
        if (mask.at(x, y)) {
          area += 1;
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    if (area < min_area_px) continue;
    CropRect rect{static_cast<int>(i), static_cast<double>(x0), static_cast<double>(y0),
                  static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1),
                  area};
    cands.push_back({static_cast<int>(i), std::move(mask), area, rect});
  }
  std::vector<bool> dead(cands.size(), false);
  for (size_t i = 0; i < cands.size(); ++i)
    for (size_t j = i + 1; j < cands.size(); ++j) {
      if (dead[i] || dead[j]) continue;
      double inter = 0;
      for (size_t p = 0; p < cands[i].mask.size(); ++p)
        if (cands[i].mask.data[p] && cands[j].mask.data[p]) inter += 1;
      double uni = cands[i].area + cands[j].area - inter;
      if (uni > 0 && inter / uni > max_overlap) {
        if (cands[i].area >= cands[j].area)
          dead[j] = true;
        else
          dead[i] = true;
      }
    }
  std::vector<CropRect> out;
  for (size_t i = 0; i < cands.size(); ++i)
    if (!dead[i]) out.push_back(cands[i].rect);
  return out;
}

void save_bank(const std::string& dir, const std::vector<BankEntry>& entries) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.jsonl");
  std::ofstream bin(dir + "/embeddings.bin", std::ios::binary);
  int dim = entries.empty() ? 0 : static_cast<int>(entries[0].embedding.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    const BankEntry& e = entries[i];
    json j = {{"instance_id", e.instance_id}, {"color", e.color},
              {"brand", e.brand},           {"model", e.model},
              {"car_type", e.car_type},     {"asset_path", e.asset_path},
              {"embedding_row", i}};
    manifest << j.dump() << "\n";
    bin.write(reinterpret_cast<const char*>(e.embedding.data()),
              static_cast<std::streamsize>(e.embedding.size() * sizeof(float)));
  }
  std::ofstream hdr(dir + "/embeddings.json");
  hdr << json{{"rows", entries.size()}, {"dim", dim}}.dump() << "\n";
}

MemoryBank load_bank(const std::string& dir) {
  std::ifstream hdr(dir + "/embeddings.json");
  if (!hdr) throw std::runtime_error("bank: missing embeddings.json in " + dir);
  json h = json::parse(hdr);
  size_t rows = h.at("rows");
  int dim = h.at("dim");
  std::ifstream bin(dir + "/embeddings.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("bank: missing embeddings.bin in " + dir);
  std::vector<float> flat(rows * dim);
  bin.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!bin && rows > 0) throw std::runtime_error("bank: truncated embeddings.bin");

  std::ifstream manifest(dir + "/manifest.jsonl");
  if (!manifest) throw std::runtime_error("bank: missing manifest.jsonl in " + dir);
  std::vector<BankEntry> entries;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    BankEntry e;
    e.instance_id = j.at("instance_id");
    e.color = j.at("color");
    e.brand = j.value("brand", "");
    e.model = j.value("model", "");
    e.car_type = j.value("car_type", "");
    e.asset_path = j.value("asset_path", "");
    size_t row = j.at("embedding_row");
    if (row >= rows) throw std::runtime_error("bank: embedding_row out of range");
    e.embedding = Eigen::Map<Eigen::VectorXf>(flat.data() + row * dim, dim);
    entries.push_back(std::move(e));
  }
  return build_bank(std::move(entries));
}

}  // namespace resplat
