#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "irsc/rng.hpp"

namespace irsc::data {

enum class Source { mnist, fashion_mnist, unknown };

// 28x28 grayscale images with pixels mapped to [-1, 1] (x / 127.5 - 1).
struct ImageSet {
  std::size_t count = 0;
  std::size_t height = 28;
  std::size_t width = 28;
  std::vector<double> pixels;  // count * height * width, row-major
  Source source = Source::unknown;

  std::size_t image_size() const { return height * width; }
  std::span<const double> image(std::size_t i) const {
    return std::span<const double>(pixels).subspan(i * image_size(),
                                                   image_size());
  }
  // Keeps the first `n` images.
  ImageSet head(std::size_t n) const;
};

// Reads an IDX unsigned-byte image file (magic 0x00000803, 28x28 dims),
// transparently inflating gzip input (detected by its 1f 8b magic).
// Parse failures report the offending byte offset.
ImageSet load_idx_images(const std::filesystem::path& path);

// Epoch-seeded shuffled batches; the final partial batch is dropped.
class BatchIter {
 public:
  BatchIter(const ImageSet& set, std::size_t batch_size, rng::Stream shuffle);

  std::size_t batch_count() const { return count_ / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }
  // Flattened [batch_size x 784] pixels of batch b, row-major.
  void batch(std::size_t b, std::vector<double>& out) const;
  std::span<const std::size_t> order() const { return order_; }

 private:
  const ImageSet* set_;
  std::size_t batch_size_;
  std::size_t count_;
  std::vector<std::size_t> order_;
};

}  // namespace irsc::data
