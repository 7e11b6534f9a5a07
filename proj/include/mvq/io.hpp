#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvq/accel.hpp"
#include "mvq/tensor.hpp"

namespace mvq {

struct NamedTensor {
    std::string name;
    WeightTensor tensor;
};

// Raw tensor files are a text manifest (key=value lines: name, dtype=f32,
// shape=Cout,Cin,Kh,Kw, optional data=<blob path relative to the manifest>)
// plus a little-endian f32 blob in row-major order. The blob defaults to the
// manifest path with its extension replaced by ".bin".
NamedTensor read_tensor_manifest(const std::filesystem::path& manifest);
void write_tensor_manifest(const std::filesystem::path& manifest, const NamedTensor& t);

// Layer tables: one layer per line, "name Cout Cin Kh Kw OH OW".
// '#' starts a comment.
std::vector<LayerSpec> read_layer_table(const std::filesystem::path& path);

// Compression job list: one manifest per line with optional key=value
// overrides (d=, k=, nm=N:M, qc=) and the word "exclude" to skip the layer.
struct LayerJob {
    std::filesystem::path manifest;
    std::optional<uint32_t> d, k, qc;
    std::optional<std::pair<uint32_t, uint32_t>> nm;
    bool include = true;
};

std::vector<LayerJob> read_compress_config(const std::filesystem::path& path);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes);

} // namespace mvq
