#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "clear/evaluation.hpp"
#include "clear/forward_model.hpp"
#include "clear/solver.hpp"
#include "clear/tensor.hpp"
#include "clear/theory.hpp"
#include "clear/training.hpp"

// Bit-exact binary formats plus the flat key=value run configuration.
//
// CLIMG1: magic "CLIMG1", u32le height, width, channels, then C*H*W
// f32le values channel-major row-major. File size is exactly 18 + 4*C*H*W.
//
// CLCKPT1: magic "CLCKPT1", u32le format version, mode byte, u32le epoch,
// u64le seed, length-prefixed arch text, u32le layer count, per layer a
// length-prefixed f32le weight array and bias array, then a
// length-prefixed config echo.

namespace clear::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_image(const std::string& path, const Tensor& img);
Tensor read_image(const std::string& path);

// Masks travel as single-channel 0/1 CLIMG1 files. The generator kind is
// not persisted; reads report kind uniform-1d.
void write_mask(const std::string& path, const fm::SamplingMask& mask);
fm::SamplingMask read_mask(const std::string& path);

void write_checkpoint(const std::string& path, const train::Checkpoint& ckpt);
train::Checkpoint read_checkpoint(const std::string& path);

void write_text(const std::string& path, const std::string& text);

void write_metrics_csv(const std::string& path, const std::vector<eval::MetricsRecord>& records);
void write_trace_csv(const std::string& path, const std::vector<solver::IterRecord>& trace);
void write_epoch_csv(const std::string& path, const std::vector<train::EpochStats>& stats);
void write_report_csv(const std::string& path,
                      const std::vector<theory::VerificationReport>& reports);

// 8-bit grayscale PNG with linear windowing of [min, max] onto [0, 255].
void write_png_gray(const std::string& path, const Tensor& img2d);

// Flat key=value configuration. Sources merge in priority order
// file < environment (CLEAR_ prefix) < flags; unknown keys are rejected.
class RunConfig {
public:
    void declare(const std::string& key, const std::string& default_value);
    bool known(const std::string& key) const;
    void set(const std::string& key, const std::string& value);  // throws on unknown

    void load_file(const std::string& path);
    void load_env();
    // --key value or --key=value pairs; returns remaining positionals.
    std::vector<std::string> apply_flags(const std::vector<std::string>& args);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    std::string echo() const;  // declaration-ordered key = value lines

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

std::string env_key(const std::string& key);  // train.eta -> CLEAR_TRAIN_ETA

}  // namespace clear::io
