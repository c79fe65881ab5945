#include "sbp/history_register.hpp"

#include <algorithm>

namespace sbp {

HistoryRegister::HistoryRegister(std::size_t length)
    : length_(length), words_((length + 63) / 64, 0) {}

void HistoryRegister::push(bool taken) {
  if (length_ == 0) return;
  for (std::size_t k = words_.size() - 1; k > 0; --k)
    words_[k] = (words_[k] << 1) | (words_[k - 1] >> 63);
  words_[0] = (words_[0] << 1) | (taken ? 1u : 0u);
  const std::size_t tail = length_ & 63;
  if (tail != 0) words_.back() &= (std::uint64_t{1} << tail) - 1;
}

void HistoryRegister::clear() { std::fill(words_.begin(), words_.end(), 0); }

std::uint64_t HistoryRegister::extract(std::size_t pos, unsigned width) const {
  if (width == 0 || pos >= length_) return 0;
  const std::size_t word = pos >> 6;
  const unsigned off = pos & 63;
  std::uint64_t v = words_[word] >> off;
  if (off != 0 && word + 1 < words_.size()) v |= words_[word + 1] << (64 - off);
  if (width < 64) v &= (std::uint64_t{1} << width) - 1;
  return v;
}

std::uint64_t HistoryRegister::fold(std::size_t length, unsigned width) const {
  length = std::min(length, length_);
  std::uint64_t r = 0;
  for (std::size_t pos = 0; pos < length; pos += width) {
    const auto w = static_cast<unsigned>(std::min<std::size_t>(width, length - pos));
    r ^= extract(pos, w);
  }
  return r;
}

}  // namespace sbp
