#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smoke/image.hpp"
#include "smoke/objectness.hpp"

namespace smoke {

/// One dataset entry in memory. Background samples carry an empty mask and
/// no boxes.
struct Sample {
  std::string id;
  ImageU8 image;  // RGB
  ImageU8 mask;   // 1 channel, 255 = smoke; empty for background samples
  int frame_label = 0;
  std::vector<BBox> boxes;
};

/// Validated view of one split directory (images/, masks/, boxes/,
/// labels.csv). Built by scan_dataset; every referenced file is known to
/// exist.
struct DatasetManifest {
  std::string root;   // the split directory itself
  std::string split;  // informational tag ("train", "test", ...)
  struct Entry {
    std::string id;
    std::string image_path;
    std::string mask_path;   // empty for background entries
    std::string boxes_path;  // empty when no boxes file exists
    int frame_label = 0;
  };
  std::vector<Entry> entries;
};

/// Reads labels.csv under `dir` and validates the layout: smoke entries
/// (label 1) must have a mask file, background entries must not carry a
/// nonempty mask, and every referenced file must exist. Throws DataError
/// naming the offending entry.
DatasetManifest scan_dataset(const std::string& dir, const std::string& split);

/// Decodes every entry. Masks are binarized (>127 -> 255); a mask/image
/// size mismatch is a DataError naming the entry.
std::vector<Sample> load_dataset(const DatasetManifest& manifest);

/// Writes samples in the split layout. `provenance` goes into a comment
/// line of labels.csv and the PNG text chunks.
void write_dataset(const std::string& dir, const std::vector<Sample>& samples,
                   const std::string& provenance);

std::vector<BBox> read_boxes_json(const std::string& path);
void write_boxes_json(const std::string& path, const std::vector<BBox>& boxes);

}  // namespace smoke
