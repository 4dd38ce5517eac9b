#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

namespace saccn {

// Error taxonomy used across the library. ShapeError covers contract
// violations between tensors, DataError anything read from or written to
// disk, NumericError divergence and failed numeric checks. The CLI maps
// these onto its exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class ShapeError : public Error {
  public:
    using Error::Error;
};
class DataError : public Error {
  public:
    using Error::Error;
};
class NumericError : public Error {
  public:
    using Error::Error;
};

namespace detail {
inline void msg_append(std::ostringstream&) {}
template <class A, class... Rest>
void msg_append(std::ostringstream& os, A&& a, Rest&&... rest) {
    os << a;
    msg_append(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <class... Args>
std::string msg(Args&&... args) {
    std::ostringstream os;
    detail::msg_append(os, std::forward<Args>(args)...);
    return os.str();
}

// Dense tensor extents, rank 1..4, every extent >= 1. Rank-4 tensors are
// interpreted as N,C,H,W.
class Shape {
  public:
    static constexpr int kMaxRank = 4;

    Shape() = default;
    Shape(std::initializer_list<int64_t> extents) {
        if (extents.size() == 0 || extents.size() > kMaxRank)
            throw ShapeError(msg("shape rank must be 1..4, got ", extents.size()));
        rank_ = static_cast<int>(extents.size());
        int i = 0;
        for (int64_t e : extents) {
            if (e < 1) throw ShapeError(msg("shape extent must be >= 1, got ", e));
            ext_[i++] = e;
        }
    }

    int rank() const { return rank_; }
    int64_t extent(int axis) const { return ext_[static_cast<size_t>(axis)]; }
    int64_t operator[](int axis) const { return extent(axis); }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < rank_; ++i) n *= ext_[static_cast<size_t>(i)];
        return rank_ == 0 ? 0 : n;
    }

    bool operator==(const Shape& o) const {
        if (rank_ != o.rank_) return false;
        for (int i = 0; i < rank_; ++i)
            if (ext_[static_cast<size_t>(i)] != o.ext_[static_cast<size_t>(i)]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    // Extents padded with trailing 1s to rank 4; lets op kernels run one
    // fixed-depth loop nest for any rank.
    std::array<int64_t, 4> padded() const {
        std::array<int64_t, 4> p{1, 1, 1, 1};
        for (int i = 0; i < rank_; ++i) p[static_cast<size_t>(i)] = ext_[static_cast<size_t>(i)];
        return p;
    }

    std::string str() const {
        std::ostringstream os;
        for (int i = 0; i < rank_; ++i) {
            if (i) os << 'x';
            os << ext_[static_cast<size_t>(i)];
        }
        return os.str();
    }

  private:
    std::array<int64_t, 4> ext_{1, 1, 1, 1};
    int rank_ = 0;
};

namespace detail {

inline std::array<int64_t, 4> row_major_strides(const std::array<int64_t, 4>& ext) {
    std::array<int64_t, 4> s{};
    s[3] = 1;
    for (int i = 2; i >= 0; --i) s[static_cast<size_t>(i)] = s[static_cast<size_t>(i) + 1] * ext[static_cast<size_t>(i) + 1];
    return s;
}

// Strides with 0 on axes where the operand has extent 1; indexing with the
// full-shape counters then lands on the broadcast element.
inline std::array<int64_t, 4> broadcast_strides(const std::array<int64_t, 4>& ext) {
    auto s = row_major_strides(ext);
    for (size_t i = 0; i < 4; ++i)
        if (ext[i] == 1) s[i] = 0;
    return s;
}

}  // namespace detail

}  // namespace saccn
