#include "irsc/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace irsc::data {

namespace {

std::vector<unsigned char> read_file_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is),
                                    std::istreambuf_iterator<char>());
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                  const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw std::runtime_error(name + ": inflateInit failed");
  }
  std::vector<unsigned char> out;
  out.reserve(in.size() * 4);
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  unsigned char buf[1 << 16];
  int ret = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error(name + ": corrupt gzip stream (zlib " +
                               std::to_string(ret) + ")");
    }
    out.insert(out.end(), buf, buf + sizeof(buf) - zs.avail_out);
  } while (ret != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::uint32_t read_be32(const std::vector<unsigned char>& d,
                        std::size_t offset, const std::string& name) {
  if (offset + 4 > d.size()) {
    throw std::runtime_error(name + ": truncated at byte offset " +
                             std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(d[offset]) << 24) |
         (static_cast<std::uint32_t>(d[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(d[offset + 2]) << 8) |
         static_cast<std::uint32_t>(d[offset + 3]);
}

Source source_from_name(const std::string& name) {
  if (name.find("fashion") != std::string::npos) return Source::fashion_mnist;
  if (name.find("mnist") != std::string::npos) return Source::mnist;
  return Source::unknown;
}

}  // namespace

ImageSet ImageSet::head(std::size_t n) const {
  if (n > count) {
    throw std::invalid_argument("ImageSet::head: " + std::to_string(n) +
                                " > count " + std::to_string(count));
  }
  ImageSet out = *this;
  out.count = n;
  out.pixels.resize(n * image_size());
  return out;
}

ImageSet load_idx_images(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  std::vector<unsigned char> raw = read_file_raw(path);
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) {
    raw = gunzip(raw, name);
  }
  const std::uint32_t magic = read_be32(raw, 0, name);
  if (magic != 0x00000803) {
    throw std::runtime_error(name + ": bad IDX magic at byte offset 0 (got 0x" +
                             [&] {
                               char buf[16];
                               std::snprintf(buf, sizeof(buf), "%08x", magic);
                               return std::string(buf);
                             }() +
                             ", want 0x00000803)");
  }
  const std::uint32_t count = read_be32(raw, 4, name);
  const std::uint32_t rows = read_be32(raw, 8, name);
  const std::uint32_t cols = read_be32(raw, 12, name);
  if (rows != 28 || cols != 28) {
    throw std::runtime_error(name + ": unsupported dims " +
                             std::to_string(rows) + "x" + std::to_string(cols) +
                             " at byte offset 8 (want 28x28)");
  }
  const std::size_t expected = 16 + static_cast<std::size_t>(count) * 784;
  if (raw.size() < expected) {
    throw std::runtime_error(name + ": truncated at byte offset " +
                             std::to_string(raw.size()) + " (want " +
                             std::to_string(expected) + ")");
  }
  ImageSet set;
  set.count = count;
  set.source = source_from_name(name);
  set.pixels.resize(static_cast<std::size_t>(count) * 784);
  for (std::size_t i = 0; i < set.pixels.size(); ++i) {
    set.pixels[i] = static_cast<double>(raw[16 + i]) / 127.5 - 1.0;
  }
  return set;
}

BatchIter::BatchIter(const ImageSet& set, std::size_t batch_size,
                     rng::Stream shuffle)
    : set_(&set), batch_size_(batch_size), count_(set.count) {
  if (batch_size == 0 || batch_size > set.count) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " out of range for " +
                                std::to_string(set.count) + " images");
  }
  order_.resize(count_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  // Fisher-Yates with the epoch stream.
  for (std::size_t i = count_; i > 1; --i) {
    std::swap(order_[i - 1], order_[shuffle.uniform_index(i)]);
  }
}

void BatchIter::batch(std::size_t b, std::vector<double>& out) const {
  if (b >= batch_count()) {
    throw std::out_of_range("batch index " + std::to_string(b));
  }
  const std::size_t isz = set_->image_size();
  out.resize(batch_size_ * isz);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::span<const double> img = set_->image(order_[b * batch_size_ + i]);
    std::copy(img.begin(), img.end(), out.begin() + i * isz);
  }
}

}  // namespace irsc::data
