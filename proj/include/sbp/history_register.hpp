#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sbp {

// Fixed-length shift register of branch outcomes.
// Bit 0 holds the most recent outcome; 1 = taken, 0 = not-taken.
class HistoryRegister {
 public:
  HistoryRegister() = default;
  explicit HistoryRegister(std::size_t length);

  std::size_t size() const { return length_; }

  bool operator[](std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

  // Shifts every bit one position older and inserts `taken` at index 0.
  void push(bool taken);
  void clear();

  // Bits [pos, pos + width) packed into an integer (bit pos -> result bit 0).
  // Positions past size() read as zero. width <= 64.
  std::uint64_t extract(std::size_t pos, unsigned width) const;

  // XOR-fold of the newest `length` bits down to `width` bits.
  std::uint64_t fold(std::size_t length, unsigned width) const;

  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const HistoryRegister&) const = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace sbp
