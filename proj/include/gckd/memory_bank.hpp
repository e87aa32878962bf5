#pragma once

#include <cstdint>
#include <vector>

#include "gckd/encoder.hpp"
#include "gckd/numerics.hpp"
#include "gckd/synth_data.hpp"

namespace gckd {

// Fixed-capacity FIFO queue of unit-norm embeddings for one (domain,
// modality) designation. Single writer; snapshots are immutable copies.
class MemoryBank {
public:
    MemoryBank(std::size_t capacity, Domain domain, Modality modality);

    // Rows are enqueued in order; the oldest entries are evicted once the
    // capacity is exceeded. Tags must match the bank designation.
    void push_batch(const FeatureBatch& feats, std::uint64_t iteration_stamp);
    // Untagged variant used internally by the trainer (rows must be unit norm).
    void push_rows(const Matrix& rows, std::uint64_t iteration_stamp);

    // Copy of the contents, oldest -> newest. Empty bank yields a 0 x D
    // matrix (D unknown until first push, reported as 0 then).
    Matrix snapshot() const;
    std::vector<std::uint64_t> stamps() const;

    std::size_t size() const { return entries_.size() < capacity_ ? entries_.size() : capacity_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t write_cursor() const { return write_cursor_; }
    Domain domain() const { return domain_; }
    Modality modality() const { return modality_; }
    std::size_t dim() const { return dim_; }

private:
    std::size_t capacity_;
    Domain domain_;
    Modality modality_;
    std::size_t dim_ = 0;
    std::size_t write_cursor_ = 0;  // next slot to write once full
    std::vector<Vector> entries_;   // ring once size == capacity
    std::vector<std::uint64_t> stamps_;
};

}  // namespace gckd
