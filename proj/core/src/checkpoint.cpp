#include "aglab/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aglab/types.hpp"

namespace aglab {

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void text(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& in) : in_(in) {}
    void need(std::size_t n) const
    {
        if (pos_ + n > in_.size()) {
            throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }
    std::uint8_t u8()
    {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string text()
    {
        const std::uint32_t n = u32();
        need(n);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::string& in_;
    std::size_t pos_ = 0;
};

void write_weights(Writer& w, const ModelParams& p)
{
    w.u32(static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& m : p.layers) {
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                w.f64(m(r, c));
            }
        }
    }
    w.f64(p.output_gain);
}

void read_weights(Reader& r, ModelParams& p)
{
    const std::uint32_t count = r.u32();
    if (count != static_cast<std::uint32_t>(p.arch.layer_count())) {
        throw IoError("checkpoint layer count does not match its architecture");
    }
    p.layers.clear();
    int expected_in = p.arch.input_dim();
    for (std::uint32_t l = 0; l < count; ++l) {
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        const int expected_out = (l + 1 == count) ? p.arch.output_dim() : p.arch.hidden_width;
        if (static_cast<int>(rows) != expected_out || static_cast<int>(cols) != expected_in) {
            throw IoError("checkpoint layer " + std::to_string(l) + " has unexpected shape");
        }
        Eigen::MatrixXd m(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t j = 0; j < cols; ++j) {
                m(i, j) = r.f64();
            }
        }
        p.layers.push_back(std::move(m));
        expected_in = expected_out;
    }
    p.output_gain = r.f64();
}

} // namespace

const ModelParams& Checkpoint::select(double sigma_rel) const
{
    if (sigma_rel <= 0.0) {
        return params;
    }
    for (const auto& e : ema) {
        if (std::abs(e.sigma_rel - sigma_rel) < 1e-12) {
            return e.params;
        }
    }
    throw std::invalid_argument("checkpoint has no EMA table for sigma_rel=" + std::to_string(sigma_rel));
}

std::string serialize_checkpoint(const Checkpoint& ckpt)
{
    Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    const ArchDescriptor& a = ckpt.params.arch;
    w.i32(a.hidden_width);
    w.i32(a.hidden_layers);
    w.u8(a.head == HeadKind::energy ? 0 : 1);
    w.i32(a.class_count);
    w.f64(ckpt.params.sigma_data);
    w.u64(ckpt.step);
    write_weights(w, ckpt.params);
    w.text(ckpt.rng_state);
    w.u32(static_cast<std::uint32_t>(ckpt.ema.size()));
    for (const auto& e : ckpt.ema) {
        w.f64(e.sigma_rel);
        w.f64(e.exponent);
        write_weights(w, e.params);
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes)
{
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw IoError("not an AGLB checkpoint");
    }
    Reader r(bytes);
    for (int i = 0; i < 4; ++i) {
        r.u8();
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ArchDescriptor& a = ckpt.params.arch;
    a.hidden_width = r.i32();
    a.hidden_layers = r.i32();
    const std::uint8_t head = r.u8();
    if (head > 1) {
        throw IoError("checkpoint has unknown head kind");
    }
    a.head = head == 0 ? HeadKind::energy : HeadKind::direct_score;
    a.class_count = r.i32();
    a.validate();
    ckpt.params.sigma_data = r.f64();
    ckpt.step = r.u64();
    read_weights(r, ckpt.params);
    ckpt.rng_state = r.text();
    const std::uint32_t tables = r.u32();
    for (std::uint32_t i = 0; i < tables; ++i) {
        EmaSnapshot e;
        e.sigma_rel = r.f64();
        e.exponent = r.f64();
        e.params.arch = a;
        e.params.sigma_data = ckpt.params.sigma_data;
        read_weights(r, e.params);
        ckpt.ema.push_back(std::move(e));
    }
    if (!r.done()) {
        throw IoError("trailing bytes after checkpoint payload");
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize_checkpoint(ss.str());
    } catch (const std::invalid_argument& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

} // namespace aglab
