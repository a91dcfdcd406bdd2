#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trim/matrix.hpp"

namespace trim {

struct TensorEntry {
    std::vector<std::uint64_t> shape;
    std::vector<float> data; // row-major, length = product(shape)
};

// Named-tensor archive. Entries enumerate in name order; all values finite.
//
// On-disk layout ("TNSR" format, version 1):
//   magic "TNSR" (4 bytes)
//   format version, u32 LE = 1
//   header length, u64 LE
//   header: UTF-8 JSON, name -> {"shape":[...],"offset":u64,"nbytes":u64},
//           offsets relative to the first payload byte
//   payload: raw little-endian f32, starts at the byte after the header, no padding
class TensorContainer {
public:
    void put(const std::string& name, TensorEntry entry);
    void put_matrix(const std::string& name, const Matrix& m);
    void put_vector(const std::string& name, const std::vector<double>& v);

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const TensorEntry& at(const std::string& name) const;

    // Entry must be 2-D / 1-D respectively.
    Matrix matrix_at(const std::string& name) const;
    std::vector<float> vector_at(const std::string& name) const;

    const std::map<std::string, TensorEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, TensorEntry> entries_;
};

TensorContainer load_container(const std::string& path);

// Canonical layout: entries packed contiguously in name order. Atomic
// (write-temp-then-rename), so save followed by load round-trips bit-exactly.
void save_container(const TensorContainer& c, const std::string& path);

} // namespace trim
