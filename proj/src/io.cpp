#include "clear/io.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace clear::io {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(std::string data, std::string path)
        : data_(std::move(data)), path_(std::move(path)) {}

    void expect_magic(const char* magic) {
        const std::size_t n = std::strlen(magic);
        if (data_.size() < pos_ + n || std::memcmp(data_.data() + pos_, magic, n) != 0)
            throw IoError(path_ + ": bad magic, expected " + magic);
        pos_ += n;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<unsigned char>(data_[pos_++]);
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void expect_end() {
        if (pos_ != data_.size())
            throw IoError(path_ + ": " + std::to_string(data_.size() - pos_) +
                          " trailing bytes");
    }
    const std::string& path() const { return path_; }

private:
    void need(std::size_t n) {
        if (data_.size() < pos_ + n) throw IoError(path_ + ": truncated file");
    }
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError(path + ": write failed");
}

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint8_t mode_byte(train::Mode m) {
    switch (m) {
        case train::Mode::CLEAR: return 0;
        case train::Mode::UNCLEAR: return 1;
        case train::Mode::AR: return 2;
    }
    return 0;
}

train::Mode mode_from_byte(std::uint8_t b, const std::string& path) {
    switch (b) {
        case 0: return train::Mode::CLEAR;
        case 1: return train::Mode::UNCLEAR;
        case 2: return train::Mode::AR;
    }
    throw IoError(path + ": unknown mode byte " + std::to_string(b));
}

}  // namespace

void write_image(const std::string& path, const Tensor& img) {
    if (img.shape.size() != 3)
        throw IoError(path + ": images are CxHxW, got " + shape_str(img.shape));
    require_finite(img, "write_image");
    std::string out;
    out.reserve(18 + 4 * img.size());
    out += "CLIMG1";
    put_u32(out, static_cast<std::uint32_t>(img.shape[1]));
    put_u32(out, static_cast<std::uint32_t>(img.shape[2]));
    put_u32(out, static_cast<std::uint32_t>(img.shape[0]));
    for (std::size_t i = 0; i < img.size(); ++i) put_f32(out, static_cast<float>(img[i]));
    spit(path, out);
}

Tensor read_image(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("CLIMG1");
    const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
    if (h == 0 || w == 0 || c == 0 || h > 1u << 20 || w > 1u << 20 || c > 1024)
        throw IoError(path + ": implausible dimensions");
    Tensor img({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = r.f32();
    r.expect_end();
    if (!all_finite(img)) throw IoError(path + ": non-finite values");
    return img;
}

void write_mask(const std::string& path, const fm::SamplingMask& mask) {
    Tensor img({1, mask.height, mask.width});
    for (std::size_t i = 0; i < mask.keep.size(); ++i) img[i] = mask.keep[i] ? 1.0 : 0.0;
    write_image(path, img);
}

fm::SamplingMask read_mask(const std::string& path) {
    const Tensor img = read_image(path);
    if (img.shape[0] != 1) throw IoError(path + ": masks are single-channel");
    fm::SamplingMask mask;
    mask.height = img.shape[1];
    mask.width = img.shape[2];
    mask.keep.resize(img.size());
    bool any = false;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (img[i] != 0.0 && img[i] != 1.0)
            throw IoError(path + ": mask entries must be 0 or 1");
        mask.keep[i] = img[i] == 1.0 ? 1 : 0;
        any = any || mask.keep[i];
    }
    if (!any) throw IoError(path + ": mask keeps nothing");
    return mask;
}

void write_checkpoint(const std::string& path, const train::Checkpoint& ckpt) {
    std::string out;
    out += "CLCKPT1";
    put_u32(out, ckpt.version);
    out.push_back(static_cast<char>(mode_byte(ckpt.mode)));
    put_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
    put_u64(out, ckpt.seed);
    const std::string arch = icnn::arch_to_text(ckpt.arch);
    put_u32(out, static_cast<std::uint32_t>(arch.size()));
    out += arch;
    put_u32(out, static_cast<std::uint32_t>(ckpt.layers.size()));
    for (const auto& layer : ckpt.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.w.size()));
        for (float v : layer.w) put_f32(out, v);
        put_u32(out, static_cast<std::uint32_t>(layer.b.size()));
        for (float v : layer.b) put_f32(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(ckpt.config_echo.size()));
    out += ckpt.config_echo;
    spit(path, out);
}

train::Checkpoint read_checkpoint(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("CLCKPT1");
    train::Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != kCheckpointVersion)
        throw IoError(path + ": checkpoint version " + std::to_string(ckpt.version) +
                      ", this build reads version " + std::to_string(kCheckpointVersion));
    ckpt.mode = mode_from_byte(r.u8(), path);
    ckpt.epoch = static_cast<int>(r.u32());
    ckpt.seed = r.u64();
    try {
        ckpt.arch = icnn::arch_from_text(r.bytes(r.u32()));
    } catch (const std::runtime_error& e) {
        throw IoError(path + ": " + e.what());
    }
    const std::uint32_t n_layers = r.u32();
    if (n_layers > 4096) throw IoError(path + ": implausible layer count");
    ckpt.layers.resize(n_layers);
    for (auto& layer : ckpt.layers) {
        const std::uint32_t wn = r.u32();
        if (wn > (1u << 26)) throw IoError(path + ": implausible blob size");
        layer.w.resize(wn);
        for (float& v : layer.w) v = r.f32();
        const std::uint32_t bn = r.u32();
        if (bn > (1u << 26)) throw IoError(path + ": implausible blob size");
        layer.b.resize(bn);
        for (float& v : layer.b) v = r.f32();
    }
    ckpt.config_echo = r.bytes(r.u32());
    r.expect_end();
    return ckpt;
}

void write_text(const std::string& path, const std::string& text) { spit(path, text); }

void write_metrics_csv(const std::string& path, const std::vector<eval::MetricsRecord>& records) {
    std::ostringstream os;
    os << "method,mask,image_id,nmse,psnr_db,ssim,aggregate,nmse_std,psnr_std,ssim_std\n";
    for (const auto& r : records) {
        os << r.method << ',' << r.mask << ',' << r.image_id << ',' << fmt_double(r.nmse) << ','
           << fmt_double(r.psnr_db) << ',' << fmt_double(r.ssim) << ',' << (r.aggregate ? 1 : 0)
           << ',' << fmt_double(r.nmse_std) << ',' << fmt_double(r.psnr_std) << ','
           << fmt_double(r.ssim_std) << '\n';
    }
    spit(path, os.str());
}

void write_trace_csv(const std::string& path, const std::vector<solver::IterRecord>& trace) {
    std::ostringstream os;
    os << "iter,phi,residual,psnr\n";
    for (const auto& rec : trace)
        os << rec.iter << ',' << fmt_double(rec.phi) << ',' << fmt_double(rec.residual) << ','
           << fmt_double(rec.psnr) << '\n';
    spit(path, os.str());
}

void write_epoch_csv(const std::string& path, const std::vector<train::EpochStats>& stats) {
    std::ostringstream os;
    os << "epoch,loss,real_mean,gen_mean,penalty\n";
    for (const auto& s : stats)
        os << s.epoch << ',' << fmt_double(s.loss) << ',' << fmt_double(s.real_mean) << ','
           << fmt_double(s.gen_mean) << ',' << fmt_double(s.penalty) << '\n';
    spit(path, os.str());
}

void write_report_csv(const std::string& path,
                      const std::vector<theory::VerificationReport>& reports) {
    std::ostringstream os;
    os << "check,stat,value\n";
    for (const auto& rep : reports) {
        os << rep.name << ",pass," << (rep.pass ? 1 : 0) << '\n';
        for (const auto& [k, v] : rep.stats) os << rep.name << ',' << k << ',' << fmt_double(v) << '\n';
    }
    spit(path, os.str());
}

namespace {

void put_be32(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void png_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    const auto crc =
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_gray(const std::string& path, const Tensor& img2d) {
    int h, w;
    const double* data;
    if (img2d.shape.size() == 2) {
        h = img2d.shape[0];
        w = img2d.shape[1];
    } else if (img2d.shape.size() == 3 && img2d.shape[0] == 1) {
        h = img2d.shape[1];
        w = img2d.shape[2];
    } else {
        throw IoError(path + ": png writer takes a single-channel image");
    }
    data = img2d.ptr();

    double lo = data[0], hi = data[0];
    for (std::size_t i = 0; i < img2d.size(); ++i) {
        lo = std::min(lo, data[i]);
        hi = std::max(hi, data[i]);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

    std::string raw;
    raw.reserve(static_cast<std::size_t>(h) * (w + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back('\0');  // filter type none
        for (int x = 0; x < w; ++x) {
            const double v = (data[static_cast<std::size_t>(y) * w + x] - lo) * scale;
            raw.push_back(static_cast<char>(static_cast<int>(std::lround(v))));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  9) != Z_OK)
        throw IoError(path + ": deflate failed");
    compressed.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", compressed);
    png_chunk(out, "IEND", "");
    spit(path, out);
}

void RunConfig::declare(const std::string& key, const std::string& default_value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = default_value;
}

bool RunConfig::known(const std::string& key) const { return values_.count(key) != 0; }

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    values_[key] = value;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open config file");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string env_key(const std::string& key) {
    std::string out = "CLEAR_";
    for (char c : key)
        out.push_back(c == '.' || c == '-' ? '_'
                                           : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

void RunConfig::load_env() {
    for (const std::string& key : order_) {
        const char* v = std::getenv(env_key(key).c_str());
        if (v) values_[key] = v;
    }
}

std::vector<std::string> RunConfig::apply_flags(const std::vector<std::string>& args) {
    std::vector<std::string> positional;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) {
            positional.push_back(a);
            continue;
        }
        std::string key = a.substr(2), value;
        const std::size_t eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= args.size())
                throw std::invalid_argument("flag --" + key + " needs a value");
            value = args[++i];
        }
        set(key, value);
    }
    return positional;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t pos = 0;
    int out;
    try {
        out = std::stoi(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an integer");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an integer");
    return out;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
    return out;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t pos = 0;
    unsigned long long out;
    try {
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an unsigned integer");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an unsigned integer");
    return out;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    for (const std::string& key : order_) os << key << " = " << values_.at(key) << '\n';
    return os.str();
}

}  // namespace clear::io
