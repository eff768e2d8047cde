#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specflow/runtime.hpp"

namespace specflow {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Self-describing container: "SPFLCKPT", format version, a JSON metadata
/// block, named float64 arrays with shapes, and a trailing crc32 over the
/// whole file. All integers and payloads are little-endian.
struct CheckpointArray {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<double> data;
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string meta_json = "{}";
    std::vector<CheckpointArray> arrays;

    const CheckpointArray& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    void put(std::string name, const Eigen::MatrixXd& m);
    void put(std::string name, const Eigen::VectorXd& v);
    Eigen::MatrixXd matrix(const std::string& name) const;
    Eigen::VectorXd vector(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on bad magic, version mismatch, truncation or a
// checksum failure; nothing is returned on a partial read.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model bundle <-> container. `meta` is merged into the stored metadata.
Checkpoint pack_models(const PolicyModels& models, const std::string& meta_json = "{}");
PolicyModels unpack_models(const Checkpoint& ckpt);

}  // namespace specflow
