#pragma once

// Bit-exact file formats. All integers and doubles are little-endian.
//
// KRD container (magic "KRD1"):
//   u32 version=1, u32 n_slices, u32 coils, u32 pe, u32 fe, u32 flags,
//   u32 n_maps (0 without a sensitivity block)
//   flags bit0: sampling mask block   -> u32 acl_count, f64 nominal_R, pe * u8
//   flags bit1: sensitivity block     -> n_maps * coils complex images
//   flags bit2: payload is image-domain (default: k-space)
//   payload: n_slices * coils complex images, coil-major within slice
// Complex images are pe*fe interleaved (re, im) f64 pairs, row-major. The
// reader rejects short files and trailing bytes.
//
// Model checkpoint (magic "UMC1"): header (variant, dc kind and settings, T,
// sharing, plan) followed by the per-step convolution blocks. STL checkpoint
// (magic "STL1"): plan followed by one convolution block.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "parmri/metrics.hpp"
#include "parmri/net.hpp"
#include "parmri/train.hpp"
#include "parmri/types.hpp"
#include "parmri/unrolled.hpp"

namespace parmri {

struct BadMagic : Error {
  using Error::Error;
};
struct TruncatedFile : Error {
  using Error::Error;
};
struct HeaderMismatch : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline void put_image(std::string& buf, const ComplexImage& img) {
  for (const Cx& v : img.data()) {
    put_f64(buf, v.real());
    put_f64(buf, v.imag());
  }
}

class ByteReader {
public:
  explicit ByteReader(const std::string& data) : data_(data) {}

  void need(std::size_t n) const {
    if (off_ + n > data_.size()) throw TruncatedFile("file ends inside a field");
  }

  std::uint8_t get_u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[off_++]);
  }

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[off_ + i])) << (8 * i);
    }
    off_ += 4;
    return v;
  }

  double get_f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[off_ + i]))
              << (8 * i);
    }
    off_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  ComplexImage get_image(int h, int w) {
    std::vector<Cx> data(static_cast<std::size_t>(h) * w);
    for (Cx& v : data) {
      const double re = get_f64();
      const double im = get_f64();
      v = Cx(re, im);
    }
    return ComplexImage(h, w, std::move(data));
  }

  bool expect_magic(const char* magic) {
    need(4);
    const bool ok = std::memcmp(data_.data() + off_, magic, 4) == 0;
    off_ += 4;
    return ok;
  }

  std::size_t remaining() const { return data_.size() - off_; }

private:
  const std::string& data_;
  std::size_t off_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

struct KrdFile {
  std::vector<MultiChannelImage> slices;
  std::optional<SamplingMask> mask;
  std::optional<SensitivitySet> sens;
  bool image_domain = false;
  // Grid shape; meaningful even when no slices are stored (mask/sens files).
  int coils = 0;
  int pe = 0;
  int fe = 0;

  static constexpr std::uint32_t kFlagMask = 1;
  static constexpr std::uint32_t kFlagSens = 2;
  static constexpr std::uint32_t kFlagImageDomain = 4;

  KSpaceVolume to_volume() const {
    if (!mask) throw HeaderMismatch("KRD file carries no sampling mask");
    return KSpaceVolume{slices, *mask, coils};
  }
};

inline void write_krd(const std::string& path, const KrdFile& file) {
  std::string buf;
  buf.append("KRD1");
  detail::put_u32(buf, 1);
  detail::put_u32(buf, static_cast<std::uint32_t>(file.slices.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(file.coils));
  detail::put_u32(buf, static_cast<std::uint32_t>(file.pe));
  detail::put_u32(buf, static_cast<std::uint32_t>(file.fe));
  std::uint32_t flags = 0;
  if (file.mask) flags |= KrdFile::kFlagMask;
  if (file.sens) flags |= KrdFile::kFlagSens;
  if (file.image_domain) flags |= KrdFile::kFlagImageDomain;
  detail::put_u32(buf, flags);
  detail::put_u32(buf, file.sens ? static_cast<std::uint32_t>(file.sens->n_maps()) : 0);
  if (file.mask) {
    if (file.mask->pe_lines() != file.pe) {
      throw ShapeMismatch("write_krd: mask PE length does not match header");
    }
    detail::put_u32(buf, static_cast<std::uint32_t>(file.mask->acl_count()));
    detail::put_f64(buf, file.mask->nominal_R());
    for (std::uint8_t f : file.mask->flags()) buf.push_back(static_cast<char>(f ? 1 : 0));
  }
  if (file.sens) {
    if (file.sens->coil_count() != file.coils || file.sens->height() != file.pe ||
        file.sens->width() != file.fe) {
      throw ShapeMismatch("write_krd: sensitivity shape does not match header");
    }
    for (int m = 0; m < file.sens->n_maps(); ++m) {
      for (int q = 0; q < file.sens->coil_count(); ++q) {
        detail::put_image(buf, file.sens->map(m, q));
      }
    }
  }
  for (const MultiChannelImage& slice : file.slices) {
    if (slice.channel_count() != file.coils || slice.height() != file.pe ||
        slice.width() != file.fe) {
      throw ShapeMismatch("write_krd: slice shape does not match header");
    }
    for (int q = 0; q < slice.channel_count(); ++q) {
      detail::put_image(buf, slice.channel(q));
    }
  }
  detail::write_file(path, buf);
}

inline KrdFile read_krd(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data);
  if (!r.expect_magic("KRD1")) throw BadMagic("not a KRD file: " + path);
  const std::uint32_t version = r.get_u32();
  if (version != 1) throw HeaderMismatch("unsupported KRD version");
  KrdFile file;
  const std::uint32_t n_slices = r.get_u32();
  file.coils = static_cast<int>(r.get_u32());
  file.pe = static_cast<int>(r.get_u32());
  file.fe = static_cast<int>(r.get_u32());
  const std::uint32_t flags = r.get_u32();
  const std::uint32_t n_maps = r.get_u32();
  file.image_domain = (flags & KrdFile::kFlagImageDomain) != 0;
  if (flags & KrdFile::kFlagMask) {
    const int acl = static_cast<int>(r.get_u32());
    const double nominal_R = r.get_f64();
    std::vector<std::uint8_t> mask_flags(file.pe);
    for (int i = 0; i < file.pe; ++i) mask_flags[i] = r.get_u8();
    file.mask = SamplingMask(std::move(mask_flags), acl, nominal_R);
  }
  if (flags & KrdFile::kFlagSens) {
    if (n_maps < 1 || n_maps > 2) throw HeaderMismatch("KRD n_maps out of range");
    std::vector<std::vector<ComplexImage>> maps;
    for (std::uint32_t m = 0; m < n_maps; ++m) {
      std::vector<ComplexImage> set;
      for (int q = 0; q < file.coils; ++q) set.push_back(r.get_image(file.pe, file.fe));
      maps.push_back(std::move(set));
    }
    file.sens = SensitivitySet(std::move(maps));
  } else if (n_maps != 0) {
    throw HeaderMismatch("KRD n_maps set without a sensitivity block");
  }
  for (std::uint32_t s = 0; s < n_slices; ++s) {
    std::vector<ComplexImage> coils;
    for (int q = 0; q < file.coils; ++q) coils.push_back(r.get_image(file.pe, file.fe));
    file.slices.push_back(MultiChannelImage(std::move(coils)));
  }
  if (r.remaining() != 0) throw HeaderMismatch("trailing bytes after KRD payload");
  return file;
}

namespace detail {

inline void put_conv(std::string& buf, const ConvParams& p) {
  put_u32(buf, static_cast<std::uint32_t>(p.plan.in_planes));
  put_u32(buf, static_cast<std::uint32_t>(p.plan.out_planes));
  put_u32(buf, static_cast<std::uint32_t>(p.plan.hidden));
  put_u32(buf, static_cast<std::uint32_t>(p.plan.layers));
  for (const ConvLayer& l : p.layers) {
    put_u32(buf, static_cast<std::uint32_t>(l.c_in));
    put_u32(buf, static_cast<std::uint32_t>(l.c_out));
    for (double w : l.w) put_f64(buf, w);
    for (double b : l.b) put_f64(buf, b);
  }
}

inline ConvParams get_conv(ByteReader& r) {
  ConvPlan plan;
  plan.in_planes = static_cast<int>(r.get_u32());
  plan.out_planes = static_cast<int>(r.get_u32());
  plan.hidden = static_cast<int>(r.get_u32());
  plan.layers = static_cast<int>(r.get_u32());
  ConvParams p = zeros_for_plan(plan);
  for (ConvLayer& l : p.layers) {
    if (static_cast<int>(r.get_u32()) != l.c_in || static_cast<int>(r.get_u32()) != l.c_out) {
      throw HeaderMismatch("checkpoint layer shape does not match its plan");
    }
    for (double& w : l.w) w = r.get_f64();
    for (double& b : l.b) b = r.get_f64();
  }
  return p;
}

}  // namespace detail

inline void save_model(const std::string& path, const UnrolledModel& model) {
  std::string buf;
  buf.append("UMC1");
  detail::put_u32(buf, 1);
  detail::put_u32(buf, model.variant == Variant::PCN ? 0 : 1);
  detail::put_u32(buf, model.dc.kind == DcKind::GD ? 0 : (model.dc.kind == DcKind::PM ? 1 : 2));
  detail::put_u32(buf, static_cast<std::uint32_t>(model.steps));
  detail::put_u32(buf, model.shared_weights ? 1 : 0);
  detail::put_f64(buf, model.dc.eta);
  detail::put_f64(buf, model.dc.lambda);
  detail::put_u32(buf, static_cast<std::uint32_t>(model.dc.cg_max_iter));
  detail::put_f64(buf, model.dc.cg_tol);
  detail::put_u32(buf, model.dc.train_eta ? 1 : 0);
  if (model.dc.train_eta) {
    for (double e : model.eta) detail::put_f64(buf, e);
  }
  detail::put_u32(buf, static_cast<std::uint32_t>(model.theta.size()));
  for (const ConvParams& p : model.theta) detail::put_conv(buf, p);
  detail::write_file(path, buf);
}

inline UnrolledModel load_model(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data);
  if (!r.expect_magic("UMC1")) throw BadMagic("not a model checkpoint: " + path);
  if (r.get_u32() != 1) throw HeaderMismatch("unsupported checkpoint version");
  UnrolledModel m;
  m.variant = r.get_u32() == 0 ? Variant::PCN : Variant::SN;
  const std::uint32_t dc = r.get_u32();
  m.dc.kind = dc == 0 ? DcKind::GD : (dc == 1 ? DcKind::PM : DcKind::VS);
  m.steps = static_cast<int>(r.get_u32());
  m.shared_weights = r.get_u32() != 0;
  m.dc.eta = r.get_f64();
  m.dc.lambda = r.get_f64();
  m.dc.cg_max_iter = static_cast<int>(r.get_u32());
  m.dc.cg_tol = r.get_f64();
  m.dc.train_eta = r.get_u32() != 0;
  if (m.dc.train_eta) {
    m.eta.resize(m.steps);
    for (double& e : m.eta) e = r.get_f64();
  }
  const std::uint32_t blocks = r.get_u32();
  for (std::uint32_t b = 0; b < blocks; ++b) m.theta.push_back(detail::get_conv(r));
  if (r.remaining() != 0) throw HeaderMismatch("trailing bytes after checkpoint");
  if (!m.theta.empty()) m.plan = m.theta.front().plan;
  m.check();
  return m;
}

inline void save_stl(const std::string& path, const ConvParams& params) {
  std::string buf;
  buf.append("STL1");
  detail::put_u32(buf, 1);
  detail::put_conv(buf, params);
  detail::write_file(path, buf);
}

inline ConvParams load_stl(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::ByteReader r(data);
  if (!r.expect_magic("STL1")) throw BadMagic("not an STL checkpoint: " + path);
  if (r.get_u32() != 1) throw HeaderMismatch("unsupported checkpoint version");
  ConvParams p = detail::get_conv(r);
  if (r.remaining() != 0) throw HeaderMismatch("trailing bytes after checkpoint");
  return p;
}

// CSV reports.

inline void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::string buf = "epoch,example,loss,ssim,l1,lr\n";
  char line[160];
  for (const TrainLogRow& row : log) {
    std::snprintf(line, sizeof(line), "%d,%d,%.12g,%.12g,%.12g,%.12g\n", row.epoch,
                  row.example, row.loss, row.ssim, row.l1, row.lr);
    buf += line;
  }
  detail::write_file(path, buf);
}

inline void write_metrics_csv(const std::string& path, const std::string& volume_name,
                              const VolumeMetrics& vm) {
  std::string buf;
  char line[200];
  std::snprintf(line, sizeof(line), "# data_range = %.12g (max of reference volume)\n",
                vm.data_range);
  buf += line;
  buf += "volume,slice,nmse,psnr,ssim\n";
  for (const SliceMetrics& s : vm.slices) {
    std::snprintf(line, sizeof(line), "%s,%d,%.12g,%.12g,%.12g\n", volume_name.c_str(),
                  s.slice, s.nmse, s.psnr, s.ssim);
    buf += line;
  }
  std::snprintf(line, sizeof(line), "%s,all,%.12g,%.12g,%.12g\n", volume_name.c_str(),
                vm.nmse, vm.psnr, vm.ssim);
  buf += line;
  detail::write_file(path, buf);
}

// Grayscale 8-bit PNG with stored (uncompressed) deflate blocks; output is
// deterministic byte-for-byte.

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::vector<std::uint32_t> t(256);
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline std::uint32_t adler32(const std::uint8_t* data, std::size_t n) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

inline void put_u32_be(std::string& buf, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_chunk(std::string& buf, const char* type, const std::string& payload) {
  put_u32_be(buf, static_cast<std::uint32_t>(payload.size()));
  std::string body = std::string(type, 4) + payload;
  buf += body;
  put_u32_be(buf, crc32(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

}  // namespace detail

/// Window [lo, hi] to 8 bit and write a grayscale PNG.
inline void write_png_gray8(const std::string& path, const RealImage& img, double lo,
                            double hi) {
  if (hi <= lo) hi = lo + 1.0;
  const int h = img.height();
  const int w = img.width();
  std::string raw;
  raw.reserve(static_cast<std::size_t>(h) * (w + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back('\0');  // filter type 0
    for (int x = 0; x < w; ++x) {
      double v = (img.at(y, x) - lo) / (hi - lo);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      raw.push_back(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
    }
  }

  std::string idat;
  idat.push_back(0x78);
  idat.push_back(0x01);
  std::size_t off = 0;
  while (off < raw.size() || raw.empty()) {
    const std::size_t chunk = std::min<std::size_t>(65535, raw.size() - off);
    const bool final = off + chunk == raw.size();
    idat.push_back(final ? 1 : 0);
    idat.push_back(static_cast<char>(chunk & 0xff));
    idat.push_back(static_cast<char>((chunk >> 8) & 0xff));
    idat.push_back(static_cast<char>(~chunk & 0xff));
    idat.push_back(static_cast<char>((~chunk >> 8) & 0xff));
    idat.append(raw, off, chunk);
    off += chunk;
    if (raw.empty()) break;
  }
  detail::put_u32_be(idat,
                     detail::adler32(reinterpret_cast<const std::uint8_t*>(raw.data()),
                                     raw.size()));

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(w));
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(0);   // grayscale
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  detail::put_chunk(png, "IHDR", ihdr);
  detail::put_chunk(png, "IDAT", idat);
  detail::put_chunk(png, "IEND", "");
  detail::write_file(path, png);
}

}  // namespace parmri
