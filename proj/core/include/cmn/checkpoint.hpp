#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cmn/numerics.hpp"

namespace cmn {

/// Self-describing model container. Text layout:
///
///   cmn-checkpoint 1
///   model <kind>
///   meta <key> <value>          (any number, in insertion order)
///   tensor <name> <rows> <cols>
///   <rows lines of cols space-separated doubles>
///   ...
///   end
///
/// Doubles are written in shortest round-trip form, so write/read is bit-exact.
struct Checkpoint {
    std::string model;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::pair<std::string, Matrix>> tensors;

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws DataError when missing
    const Matrix& tensor(const std::string& name) const;   // throws DataError when missing
};

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace cmn
