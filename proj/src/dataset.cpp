#include "crformer/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crformer/errors.hpp"
#include "crformer/image.hpp"
#include "crformer/mask.hpp"

namespace fs = std::filesystem;

namespace crformer {
namespace {

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path))
        throw IoError("dataset file missing: '" + path + "'");
}

}  // namespace

DatasetIndex index_dataset(const std::string& root, const std::string& split) {
    const fs::path shadow_dir = fs::path(root) / "shadow";
    const fs::path free_dir = fs::path(root) / "shadow_free";
    const fs::path mask_dir = fs::path(root) / "mask";
    if (!fs::is_directory(shadow_dir))
        throw IoError("dataset root '" + root + "' has no shadow/ directory");

    DatasetIndex index;
    index.root = root;
    index.split = split;
    for (const auto& de : fs::directory_iterator(shadow_dir)) {
        if (!de.is_regular_file() || de.path().extension() != ".png") continue;
        const std::string name = de.path().filename().string();
        DatasetEntry entry;
        entry.name = de.path().stem().string();
        entry.shadow_path = de.path().string();
        entry.shadowfree_path = (free_dir / name).string();
        entry.mask_path = (mask_dir / name).string();
        require_file(entry.shadowfree_path);
        require_file(entry.mask_path);
        index.entries.push_back(std::move(entry));
    }
    std::sort(index.entries.begin(), index.entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.name < b.name; });
    return index;
}

DatasetIndex index_dataset_manifest(const std::string& root,
                                    const std::string& manifest_path,
                                    const std::string& split) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");

    DatasetIndex index;
    index.root = root;
    index.split = split;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string a, b, c;
        if (!(ss >> a)) continue;  // blank
        if (a[0] == '#') continue;
        if (!(ss >> b >> c))
            throw IoError("manifest '" + manifest_path + "' line " +
                          std::to_string(lineno) + ": expected three paths");
        std::string extra;
        if (ss >> extra)
            throw IoError("manifest '" + manifest_path + "' line " +
                          std::to_string(lineno) + ": trailing token '" + extra + "'");
        DatasetEntry entry;
        entry.shadow_path = (fs::path(root) / a).string();
        entry.shadowfree_path = (fs::path(root) / b).string();
        entry.mask_path = (fs::path(root) / c).string();
        entry.name = fs::path(a).stem().string();
        require_file(entry.shadow_path);
        require_file(entry.shadowfree_path);
        require_file(entry.mask_path);
        index.entries.push_back(std::move(entry));
    }
    return index;
}

Triplet load_triplet(const DatasetEntry& entry) {
    Triplet t;
    t.shadow = load_image(entry.shadow_path);
    t.shadow_free = load_image(entry.shadowfree_path);
    t.mask = binarize_mask(load_image_gray(entry.mask_path), 0.5);
    if (t.shadow.shape() != t.shadow_free.shape())
        throw DimensionError("triplet '" + entry.name + "': shadow " +
                             shape_str(t.shadow.shape()) + " vs shadow-free " +
                             shape_str(t.shadow_free.shape()));
    if (t.mask.dim(1) != t.shadow.dim(1) || t.mask.dim(2) != t.shadow.dim(2))
        throw DimensionError("triplet '" + entry.name + "': mask " +
                             shape_str(t.mask.shape()) + " vs image " +
                             shape_str(t.shadow.shape()));
    return t;
}

}  // namespace crformer
