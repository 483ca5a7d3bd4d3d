#pragma once

// File formats: model container, raw signal matrices, IDX (MNIST) images and
// labels, CSV output. See docs/formats.md.

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mlcsc/conv_layer.hpp"
#include "mlcsc/errors.hpp"
#include "mlcsc/model.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

class ByteReader {
public:
    ByteReader(const std::string& data, std::size_t pos = 0) : data_(data), pos_(pos) {}

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ParseError(std::string("truncated ") + what, data_.size());
    }
    std::uint32_t u32_le(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
        pos_ += 4;
        return v;
    }
    std::uint32_t u32_be(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + b]);
        pos_ += 4;
        return v;
    }
    double f64_le(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    /// Reads up to and excluding '\n'.
    std::string line() {
        const std::size_t end = data_.find('\n', pos_);
        if (end == std::string::npos) throw ParseError("unterminated header line", pos_);
        std::string s = data_.substr(pos_, end - pos_);
        pos_ = end + 1;
        return s;
    }
    const char* ptr() const { return data_.data() + pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::string& data_;
    std::size_t pos_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Reads a file, inflating it when it is gzip-compressed.
inline std::string read_maybe_gz(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw ParseError("corrupt compressed stream in '" + path + "'", out.size());
    return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace detail

// ------------------------------------------------------------------- model

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline std::string serialize_model(const MLCSCModel& model) {
    std::ostringstream h;
    h << "MLCSC-MODEL " << kModelFormatVersion << "\n";
    h << "signal " << model.geometry().spatial_len << " " << model.geometry().channels << "\n";
    h << "lambdas";
    for (auto l : model.lambdas()) h << " " << l;
    h << "\nlayers " << model.depth() << "\n";
    for (std::size_t i = 1; i <= model.depth(); ++i) {
        const auto& l = model.layer(i);
        h << "layer " << i << " m_in " << l.m_in() << " m_out " << l.m_out() << " n " << l.n() << " stride "
          << l.stride() << " nnz " << l.nnz() << "\n";
    }
    h << "end\n";
    std::string out = h.str();
    for (const auto& l : model.layers()) {
        for (const auto& k : l.kernels()) detail::put_u32(out, static_cast<std::uint32_t>(k.size()));
        for (const auto& k : l.kernels()) {
            for (const auto& t : k) {
                detail::put_u32(out, t.offset);
                detail::put_u32(out, t.channel);
                detail::put_f64(out, t.value);
            }
        }
    }
    return out;
}

inline MLCSCModel deserialize_model(const std::string& bytes) {
    detail::ByteReader r(bytes);
    auto expect = [&](std::istringstream& s, const std::string& word, std::size_t at) {
        std::string w;
        if (!(s >> w) || w != word) throw ParseError("expected '" + word + "' in model header", at);
    };
    auto number = [&](std::istringstream& s, std::size_t at) {
        long long v;
        if (!(s >> v) || v < 0) throw ParseError("expected a non-negative integer in model header", at);
        return static_cast<std::size_t>(v);
    };

    std::size_t at = r.pos();
    {
        std::istringstream s(r.line());
        expect(s, "MLCSC-MODEL", at);
        const auto version = number(s, at);
        if (version != kModelFormatVersion) throw ParseError("unsupported model format version " + std::to_string(version), at);
    }
    at = r.pos();
    std::istringstream sig(r.line());
    expect(sig, "signal", at);
    const std::size_t len = number(sig, at);
    const std::size_t ch = number(sig, at);
    if (len == 0 || ch == 0) throw ParseError("signal geometry must be positive", at);

    at = r.pos();
    std::istringstream lam(r.line());
    expect(lam, "lambdas", at);
    std::vector<std::size_t> lambdas;
    long long v;
    while (lam >> v) {
        if (v < 0) throw ParseError("negative lambda", at);
        lambdas.push_back(static_cast<std::size_t>(v));
    }

    at = r.pos();
    std::istringstream ls(r.line());
    expect(ls, "layers", at);
    const std::size_t depth = number(ls, at);
    if (depth == 0 || depth != lambdas.size()) throw ParseError("layer count does not match lambdas", at);

    struct Shape { std::size_t m_in, m_out, n, stride, nnz; };
    std::vector<Shape> shapes;
    for (std::size_t i = 1; i <= depth; ++i) {
        at = r.pos();
        std::istringstream s(r.line());
        expect(s, "layer", at);
        if (number(s, at) != i) throw ParseError("layers out of order", at);
        Shape sh{};
        expect(s, "m_in", at); sh.m_in = number(s, at);
        expect(s, "m_out", at); sh.m_out = number(s, at);
        expect(s, "n", at); sh.n = number(s, at);
        expect(s, "stride", at); sh.stride = number(s, at);
        expect(s, "nnz", at); sh.nnz = number(s, at);
        if (sh.m_in == 0 || sh.m_out == 0 || sh.n == 0 || sh.stride == 0) throw ParseError("layer sizes must be positive", at);
        shapes.push_back(sh);
    }
    at = r.pos();
    if (r.line() != "end") throw ParseError("expected 'end' after layer headers", at);

    std::vector<ConvLayer> layers;
    for (const auto& sh : shapes) {
        std::vector<std::uint32_t> counts(sh.m_out);
        std::size_t total = 0;
        for (auto& c : counts) {
            c = r.u32_le("filter tap counts");
            total += c;
        }
        if (total != sh.nnz) throw ParseError("tap counts disagree with header nnz", r.pos());
        std::vector<Kernel> kernels(sh.m_out);
        for (std::size_t f = 0; f < sh.m_out; ++f) {
            for (std::uint32_t t = 0; t < counts[f]; ++t) {
                const std::size_t tap_at = r.pos();
                KernelTap tap;
                tap.offset = r.u32_le("tap offset");
                tap.channel = r.u32_le("tap channel");
                tap.value = r.f64_le("tap value");
                if (tap.offset >= sh.n || tap.channel >= sh.m_in) throw ParseError("tap out of bounds", tap_at);
                if (!std::isfinite(tap.value)) throw ParseError("non-finite tap value", tap_at);
                kernels[f].push_back(tap);
            }
        }
        try {
            layers.emplace_back(sh.m_in, sh.m_out, sh.n, sh.stride, std::move(kernels));
        } catch (const std::exception& e) {
            throw ParseError(std::string("invalid layer: ") + e.what(), r.pos());
        }
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after model payload", r.pos());
    try {
        return MLCSCModel(SignalGeometry(len, ch), std::move(layers), std::move(lambdas));
    } catch (const std::exception& e) {
        throw ParseError(std::string("inconsistent model: ") + e.what(), bytes.size());
    }
}

inline void save_model(const MLCSCModel& model, const std::string& path) {
    detail::write_file(path, serialize_model(model));
}

inline MLCSCModel load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

// ---------------------------------------------------------- signal matrix

inline constexpr std::uint32_t kSignalFormatVersion = 1;

struct SignalMatrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<double> values;  // row-major

    std::vector<double> row(std::size_t r) const {
        return {values.begin() + static_cast<long>(r * cols), values.begin() + static_cast<long>((r + 1) * cols)};
    }
};

inline std::string serialize_signals(const std::vector<DenseVec>& signals, std::size_t cols_if_empty = 0) {
    std::string out = "MLCS";
    detail::put_u32(out, kSignalFormatVersion);
    const std::size_t cols = signals.empty() ? cols_if_empty : signals.front().size();
    detail::put_u32(out, static_cast<std::uint32_t>(signals.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(cols));
    for (const auto& s : signals) {
        if (s.size() != cols) throw DimensionError("serialize_signals: rows of different length");
        for (double v : s.raw()) detail::put_f64(out, v);
    }
    return out;
}

inline SignalMatrix deserialize_signals(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "MLCS") != 0) throw ParseError("bad signal matrix magic", 0);
    detail::ByteReader r(bytes, 4);
    const std::uint32_t version = r.u32_le("signal header");
    if (version != kSignalFormatVersion) throw ParseError("unsupported signal matrix version", 4);
    SignalMatrix m;
    m.rows = r.u32_le("signal header");
    m.cols = r.u32_le("signal header");
    const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
    if (r.remaining() != count * 8) {
        throw ParseError("signal payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                             std::to_string(count * 8),
                         r.remaining() < count * 8 ? bytes.size() : 16 + count * 8);
    }
    m.values.resize(count);
    for (auto& v : m.values) v = r.f64_le("signal payload");
    return m;
}

inline void save_signals(const std::vector<DenseVec>& signals, const std::string& path, std::size_t cols_if_empty = 0) {
    detail::write_file(path, serialize_signals(signals, cols_if_empty));
}

/// Loads a signal matrix and attaches `geometry` to every row.
inline std::vector<DenseVec> load_signals(const std::string& path, const SignalGeometry& geometry) {
    const SignalMatrix m = deserialize_signals(detail::read_file(path));
    if (m.rows > 0 && m.cols != geometry.size()) {
        throw DimensionError("load_signals: rows have " + std::to_string(m.cols) + " values, geometry " +
                             to_string(geometry) + " needs " + std::to_string(geometry.size()));
    }
    std::vector<DenseVec> out;
    for (std::size_t r = 0; r < m.rows; ++r) out.emplace_back(geometry, m.row(r));
    return out;
}

// --------------------------------------------------------------------- IDX

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> pixels;  // count * rows * cols, scaled to [0, 1]

    double at(std::size_t image, std::size_t r, std::size_t c) const { return pixels[(image * rows + r) * cols + c]; }
};

namespace detail {

inline void check_magic(std::uint32_t found, std::uint32_t expected) {
    if (found != expected) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x, expected 0x%08x", found, expected);
        throw ParseError(buf, 0);
    }
}

}  // namespace detail

inline IdxImages parse_idx_images(const std::string& bytes) {
    detail::ByteReader r(bytes);
    if (bytes.empty()) throw ParseError("empty IDX file", 0);
    detail::check_magic(r.u32_be("IDX magic"), kIdxImagesMagic);
    IdxImages img;
    img.count = r.u32_be("IDX dimensions");
    img.rows = r.u32_be("IDX dimensions");
    img.cols = r.u32_be("IDX dimensions");
    const std::size_t n = img.count * img.rows * img.cols;
    if (r.remaining() < n) throw ParseError("truncated IDX image payload", bytes.size());
    img.pixels.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(r.ptr());
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<double>(p[i]) / 255.0;
    return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::string& bytes) {
    detail::ByteReader r(bytes);
    if (bytes.empty()) throw ParseError("empty IDX file", 0);
    detail::check_magic(r.u32_be("IDX magic"), kIdxLabelsMagic);
    const std::size_t n = r.u32_be("IDX dimensions");
    if (r.remaining() < n) throw ParseError("truncated IDX label payload", bytes.size());
    const auto* p = reinterpret_cast<const unsigned char*>(r.ptr());
    return std::vector<std::uint8_t>(p, p + n);
}

/// Reads an IDX image file (plain or gzip).
inline IdxImages read_idx(const std::string& path) { return parse_idx_images(detail::read_maybe_gz(path)); }

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    return parse_idx_labels(detail::read_maybe_gz(path));
}

inline std::string serialize_idx_images(std::size_t count, std::size_t rows, std::size_t cols,
                                        const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != count * rows * cols) throw DimensionError("serialize_idx_images: pixel count mismatch");
    std::string out;
    for (std::uint32_t v : {kIdxImagesMagic, static_cast<std::uint32_t>(count), static_cast<std::uint32_t>(rows),
                            static_cast<std::uint32_t>(cols)}) {
        for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
    }
    out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    return out;
}

/// Images as signals: image rows are the spatial axis, columns the channels.
/// With `center` the dataset mean image is subtracted. `limit` = 0 keeps all.
inline std::vector<DenseVec> idx_to_signals(const IdxImages& img, bool center, std::size_t limit = 0) {
    const std::size_t count = limit == 0 ? img.count : std::min(limit, img.count);
    const SignalGeometry g(img.rows, img.cols);
    std::vector<DenseVec> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto begin = img.pixels.begin() + static_cast<long>(i * g.size());
        out.emplace_back(g, std::vector<double>(begin, begin + static_cast<long>(g.size())));
    }
    if (center && count > 0) {
        DenseVec mean(g);
        for (const auto& s : out) mean += s;
        mean *= 1.0 / static_cast<double>(count);
        for (auto& s : out) s -= mean;
    }
    return out;
}

// --------------------------------------------------------------------- CSV

/// Comma-separated output with a fixed header; NaN prints as an empty field.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

    template <class... Ts>
    void row(const Ts&... fields) {
        std::vector<std::string> cells;
        (cells.push_back(format(fields)), ...);
        if (cells.size() != columns_) throw DimensionError("CsvWriter: row has the wrong number of fields");
        row_strings(cells);
    }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    const std::string& str() const noexcept { return text_; }
    void save(const std::string& path) const { detail::write_file(path, text_); }

    static std::string format(double v) {
        if (std::isnan(v)) return "";
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }
    static std::string format(const std::string& s) { return s; }
    static std::string format(const char* s) { return s; }
    static std::string format(bool b) { return b ? "1" : "0"; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string format(I v) {
        return std::to_string(v);
    }

private:
    std::size_t columns_;
    std::string text_;
};

/// Rows (sample, layer, index, value) for every stored entry of each stack.
inline void append_stack_rows(CsvWriter& csv, std::size_t sample_id, const LayerStack& stack) {
    for (std::size_t i = 1; i <= stack.depth(); ++i) {
        for (const auto& [idx, v] : stack.at(i).entries()) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            csv.row_strings({std::to_string(sample_id), std::to_string(i), std::to_string(idx), buf});
        }
    }
}

}  // namespace mlcsc
