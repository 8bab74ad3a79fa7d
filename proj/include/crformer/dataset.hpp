#pragma once

#include <string>
#include <vector>

#include "crformer/tensor.hpp"

namespace crformer {

struct DatasetEntry {
    std::string name;  // shared basename, for reports
    std::string shadow_path;
    std::string shadowfree_path;
    std::string mask_path;
};

struct DatasetIndex {
    std::string root;
    std::string split;  // informational tag: "train", "test", ...
    std::vector<DatasetEntry> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

// One decoded training/eval sample. The mask arrives binarized (0.5
// threshold on the grayscale PNG) and dimension-checked against the images.
struct Triplet {
    Tensor shadow;       // [3,H,W] input I^s
    Tensor shadow_free;  // [3,H,W] ground truth
    Tensor mask;         // [1,H,W] in {0,1}
};

// Walks root/{shadow, shadow_free, mask}/NAME.png, pairing files by
// basename. Every basename under shadow/ must have both partners; entries
// come back sorted by name so indexing is reproducible.
DatasetIndex index_dataset(const std::string& root, const std::string& split = "");

// Index from a manifest: one triplet per line, three whitespace-separated
// paths relative to root (shadow, shadow-free, mask). Blank lines and
// #-comments are skipped.
DatasetIndex index_dataset_manifest(const std::string& root,
                                    const std::string& manifest_path,
                                    const std::string& split = "");

// Decodes one entry; throws IoError with the offending path on decode
// failure and DimensionError if the three files disagree on size.
Triplet load_triplet(const DatasetEntry& entry);

}  // namespace crformer
