#include "gckd/memory_bank.hpp"

#include <cmath>

#include "gckd/kernels.hpp"

namespace gckd {

MemoryBank::MemoryBank(std::size_t capacity, Domain domain, Modality modality)
    : capacity_(capacity), domain_(domain), modality_(modality) {
    if (capacity_ < 1) throw ParamError("memory bank capacity must be >= 1");
    entries_.reserve(capacity_);
    stamps_.reserve(capacity_);
}

void MemoryBank::push_batch(const FeatureBatch& feats, std::uint64_t iteration_stamp) {
    if (feats.domain != domain_ || feats.modality != modality_)
        throw UsageError("memory bank push: domain/modality tag mismatch");
    push_rows(feats.features, iteration_stamp);
}

void MemoryBank::push_rows(const Matrix& rows, std::uint64_t iteration_stamp) {
    if (rows.rows == 0) return;
    if (dim_ == 0) dim_ = rows.cols;
    if (rows.cols != dim_) throw ShapeError("memory bank push: width mismatch");
    for (std::size_t i = 0; i < rows.rows; ++i) {
        const double sq = kernels::squared_norm(rows.row(i), rows.cols);
        if (std::abs(sq - 1.0) > 1e-9)
            throw UsageError("memory bank push: row is not unit norm");
        Vector v(rows.row(i), rows.row(i) + rows.cols);
        if (entries_.size() < capacity_) {
            entries_.push_back(std::move(v));
            stamps_.push_back(iteration_stamp);
        } else {
            entries_[write_cursor_] = std::move(v);
            stamps_[write_cursor_] = iteration_stamp;
            write_cursor_ = (write_cursor_ + 1) % capacity_;
        }
    }
}

Matrix MemoryBank::snapshot() const {
    const std::size_t n = size();
    Matrix out(n, dim_);
    // Oldest -> newest: when full, the write cursor points at the oldest.
    const std::size_t start = (entries_.size() == capacity_) ? write_cursor_ : 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vector& src = entries_[(start + i) % entries_.size()];
        std::copy(src.begin(), src.end(), out.row(i));
    }
    return out;
}

std::vector<std::uint64_t> MemoryBank::stamps() const {
    const std::size_t n = size();
    std::vector<std::uint64_t> out(n);
    const std::size_t start = (entries_.size() == capacity_) ? write_cursor_ : 0;
    for (std::size_t i = 0; i < n; ++i) out[i] = stamps_[(start + i) % entries_.size()];
    return out;
}

}  // namespace gckd
