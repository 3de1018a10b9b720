#include "mvda/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mvda {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* payload, std::size_t len) {
  put_u32(out, static_cast<std::uint32_t>(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload, payload + len);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, out.data() + type_pos, static_cast<uInt>(4 + len)));
  put_u32(out, crc);
}

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int h, int w, int channels) {
  if (h <= 0 || w <= 0 || (channels != 1 && channels != 3))
    throw std::invalid_argument("encode_png: unsupported image geometry");

  // Filter 0 (none) per scanline keeps the stream trivially reproducible.
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint8_t> raw((row + 1) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    raw[static_cast<std::size_t>(y) * (row + 1)] = 0;
    std::memcpy(raw.data() + static_cast<std::size_t>(y) * (row + 1) + 1,
                pixels + static_cast<std::size_t>(y) * row, row);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("encode_png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>((w >> 24) & 0xff);
  ihdr[1] = static_cast<std::uint8_t>((w >> 16) & 0xff);
  ihdr[2] = static_cast<std::uint8_t>((w >> 8) & 0xff);
  ihdr[3] = static_cast<std::uint8_t>(w & 0xff);
  ihdr[4] = static_cast<std::uint8_t>((h >> 24) & 0xff);
  ihdr[5] = static_cast<std::uint8_t>((h >> 16) & 0xff);
  ihdr[6] = static_cast<std::uint8_t>((h >> 8) & 0xff);
  ihdr[7] = static_cast<std::uint8_t>(h & 0xff);
  ihdr[8] = 8;                                         // bit depth
  ihdr[9] = channels == 1 ? 0 : 2;                     // grayscale / truecolor
  ihdr[10] = 0;                                        // compression
  ihdr[11] = 0;                                        // filter method
  ihdr[12] = 0;                                        // no interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

void decode_png(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>& pixels,
                int& h, int& w, int& channels) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
    throw std::runtime_error("decode_png: not a PNG file");

  std::size_t pos = 8;
  bool saw_ihdr = false;
  std::vector<std::uint8_t> idat;
  h = w = channels = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw std::runtime_error("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* payload = bytes.data() + pos + 8;
    const std::uint32_t expect =
        static_cast<std::uint32_t>(crc32(0, bytes.data() + pos + 4, 4 + len));
    if (expect != get_u32(bytes.data() + pos + 8 + len))
      throw std::runtime_error("decode_png: chunk CRC mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("decode_png: bad IHDR");
      w = static_cast<int>(get_u32(payload));
      h = static_cast<int>(get_u32(payload + 4));
      const int depth = payload[8], color = payload[9], interlace = payload[12];
      if (depth != 8) throw std::runtime_error("decode_png: only 8-bit images supported");
      if (color == 0)
        channels = 1;
      else if (color == 2)
        channels = 3;
      else
        throw std::runtime_error("decode_png: unsupported color type " + std::to_string(color));
      if (interlace != 0) throw std::runtime_error("decode_png: interlaced images unsupported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.empty()) throw std::runtime_error("decode_png: missing IHDR or IDAT");
  if (h <= 0 || w <= 0) throw std::runtime_error("decode_png: bad dimensions");

  const std::size_t row = static_cast<std::size_t>(w) * channels;
  std::vector<std::uint8_t> raw((row + 1) * static_cast<std::size_t>(h));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("decode_png: inflate failed (corrupt image data)");

  // Undo per-scanline filters (types 0-4).
  pixels.assign(row * static_cast<std::size_t>(h), 0);
  const int bpp = channels;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (row + 1)];
    const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (row + 1) + 1;
    std::uint8_t* dst = pixels.data() + static_cast<std::size_t>(y) * row;
    const std::uint8_t* up = y > 0 ? pixels.data() + static_cast<std::size_t>(y - 1) * row : nullptr;
    for (std::size_t x = 0; x < row; ++x) {
      const int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default:
          throw std::runtime_error("decode_png: unknown filter type " + std::to_string(filter));
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
}

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::uint8_t quantize(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

}  // namespace

void write_png(const std::string& path, const Tensor<float>& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw std::invalid_argument("write_png: image must be CxHxW with C in {1,3}, got " +
                                shape_str(image.shape()));
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(h) * w * c);
  const float* data = image.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ci = 0; ci < c; ++ci)
        interleaved[(static_cast<std::size_t>(y) * w + x) * c + ci] =
            quantize(data[ci * plane + static_cast<std::size_t>(y) * w + x]);
  write_file_bytes(path, encode_png(interleaved.data(), h, w, c));
}

void write_png(const std::string& path, const Mask& mask) {
  std::vector<std::uint8_t> gray(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) gray[i] = mask.data[i] ? 255 : 0;
  write_file_bytes(path, encode_png(gray.data(), mask.h, mask.w, 1));
}

Tensor<float> read_png(const std::string& path) {
  std::vector<std::uint8_t> pixels;
  int h = 0, w = 0, c = 0;
  decode_png(read_file_bytes(path), pixels, h, w, c);
  Tensor<float> out(Shape{c, h, w});
  float* data = out.mutable_data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ci = 0; ci < c; ++ci)
        data[ci * plane + static_cast<std::size_t>(y) * w + x] =
            static_cast<float>(pixels[(static_cast<std::size_t>(y) * w + x) * c + ci]) / 255.f;
  return out;
}

Mask read_png_mask(const std::string& path) {
  std::vector<std::uint8_t> pixels;
  int h = 0, w = 0, c = 0;
  decode_png(read_file_bytes(path), pixels, h, w, c);
  if (c != 1) throw std::runtime_error("read_png_mask: expected grayscale mask: " + path);
  Mask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = pixels[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace mvda
