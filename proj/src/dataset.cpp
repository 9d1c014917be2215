#include "smoke/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "smoke/errors.hpp"
#include "smoke/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace smoke {

std::vector<BBox> read_boxes_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open boxes file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("bad boxes JSON " + path + ": " + e.what());
  }
  std::vector<BBox> boxes;
  for (const auto& item : j) {
    BBox b;
    b.x0 = item.at("x0").get<double>();
    b.y0 = item.at("y0").get<double>();
    b.x1 = item.at("x1").get<double>();
    b.y1 = item.at("y1").get<double>();
    b.score = item.at("score").get<double>();
    boxes.push_back(b);
  }
  return boxes;
}

void write_boxes_json(const std::string& path,
                      const std::vector<BBox>& boxes) {
  json j = json::array();
  for (const BBox& b : boxes)
    j.push_back({{"x0", b.x0},
                 {"y0", b.y0},
                 {"x1", b.x1},
                 {"y1", b.y1},
                 {"score", b.score}});
  std::ofstream os(path);
  if (!os) throw DataError("cannot write boxes file " + path);
  os << j.dump(2) << "\n";
}

DatasetManifest scan_dataset(const std::string& dir,
                             const std::string& split) {
  DatasetManifest m;
  m.root = dir;
  m.split = split;
  const fs::path root(dir);
  const fs::path labels = root / "labels.csv";
  std::ifstream is(labels);
  if (!is) throw DataError("cannot open " + labels.string());
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // "image_id,frame_label"
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("malformed labels.csv line: '" + line + "'");
    DatasetManifest::Entry e;
    e.id = line.substr(0, comma);
    const std::string label_str = line.substr(comma + 1);
    if (label_str != "0" && label_str != "1")
      throw DataError("entry '" + e.id + "': frame label must be 0 or 1, got '" +
                      label_str + "'");
    e.frame_label = label_str == "1" ? 1 : 0;

    const fs::path image = root / "images" / (e.id + ".png");
    if (!fs::exists(image))
      throw DataError("entry '" + e.id + "': missing image " +
                      image.string());
    e.image_path = image.string();

    const fs::path mask = root / "masks" / (e.id + ".png");
    if (e.frame_label == 1) {
      if (!fs::exists(mask))
        throw DataError("entry '" + e.id +
                        "': smoke entry without a mask file " +
                        mask.string());
      e.mask_path = mask.string();
    } else if (fs::exists(mask)) {
      e.mask_path = mask.string();  // allowed if empty; checked at load
    }

    const fs::path boxes = root / "boxes" / (e.id + ".json");
    if (fs::exists(boxes)) e.boxes_path = boxes.string();
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw DataError("empty labels.csv in " + dir);
  return m;
}

std::vector<Sample> load_dataset(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    Sample s;
    s.id = e.id;
    s.frame_label = e.frame_label;
    s.image = read_png(e.image_path);
    if (s.image.ch == 1) {
      ImageU8 rgb(s.image.h, s.image.w, 3);
      for (int y = 0; y < s.image.h; ++y)
        for (int x = 0; x < s.image.w; ++x)
          for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = s.image.at(y, x);
      s.image = std::move(rgb);
    }
    if (!e.mask_path.empty()) {
      ImageU8 mask = read_png(e.mask_path);
      if (mask.ch != 1) mask = to_gray(mask);
      if (mask.h != s.image.h || mask.w != s.image.w)
        throw DataError("entry '" + e.id + "': mask size " +
                        std::to_string(mask.w) + "x" +
                        std::to_string(mask.h) + " does not match image " +
                        std::to_string(s.image.w) + "x" +
                        std::to_string(s.image.h));
      bool any = false;
      for (auto& v : mask.px) {
        v = v > 127 ? 255 : 0;
        any = any || v;
      }
      if (e.frame_label == 0 && any)
        throw DataError("entry '" + e.id +
                        "': background entry with a nonempty mask");
      s.mask = std::move(mask);
    }
    if (!e.boxes_path.empty()) s.boxes = read_boxes_json(e.boxes_path);
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::string& dir,
                   const std::vector<Sample>& samples,
                   const std::string& provenance) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "boxes");
  std::ofstream labels(root / "labels.csv");
  if (!labels) throw DataError("cannot write labels.csv in " + dir);
  if (!provenance.empty()) labels << "# provenance: " << provenance << "\n";
  labels << "image_id,frame_label\n";
  for (const Sample& s : samples) {
    labels << s.id << "," << s.frame_label << "\n";
    write_png((root / "images" / (s.id + ".png")).string(), s.image,
              provenance);
    if (!s.mask.empty())
      write_png((root / "masks" / (s.id + ".png")).string(), s.mask,
                provenance);
    if (!s.boxes.empty())
      write_boxes_json((root / "boxes" / (s.id + ".json")).string(),
                       s.boxes);
  }
}

}  // namespace smoke
