#include "fca/toy_detector.hpp"

#include <cstring>
#include <fstream>

#include "fca/errors.hpp"

namespace fca {
namespace {

// Prior box sizes as fractions of the input edge, coarse-to-fine. Chosen to
// bracket the object sizes the scene generator produces across its distance
// range.
constexpr double kAnchorFractions[3][kToyAnchorsPerScale][2] = {
    {{0.10, 0.075}, {0.16, 0.11}, {0.22, 0.15}},
    {{0.30, 0.20}, {0.40, 0.27}, {0.52, 0.35}},
    {{0.65, 0.44}, {0.80, 0.55}, {0.95, 0.70}},
};

constexpr char kCheckpointMagic[8] = {'F', 'C', 'A', 'T', 'O', 'Y', '0', '1'};

void write_i32(std::ostream& out, int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

int32_t read_i32(std::istream& in, const std::string& what) {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("detector checkpoint: truncated reading " + what);
    return v;
}

double read_f64(std::istream& in, const std::string& what) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("detector checkpoint: truncated reading " + what);
    return v;
}

void write_conv(std::ostream& out, const Conv2d& conv) {
    write_i32(out, conv.in_c);
    write_i32(out, conv.out_c);
    write_i32(out, conv.kernel);
    write_i32(out, conv.stride);
    write_i32(out, conv.pad);
    for (double w : conv.weight) write_f64(out, w);
    for (double b : conv.bias) write_f64(out, b);
}

Conv2d read_conv(std::istream& in) {
    const int in_c = read_i32(in, "conv in_c");
    const int out_c = read_i32(in, "conv out_c");
    const int kernel = read_i32(in, "conv kernel");
    const int stride = read_i32(in, "conv stride");
    const int pad = read_i32(in, "conv pad");
    if (in_c <= 0 || out_c <= 0 || kernel <= 0 || stride <= 0 || pad < 0)
        throw ParseError("detector checkpoint: invalid conv spec");
    Conv2d conv(in_c, out_c, kernel, stride, pad);
    for (double& w : conv.weight) w = read_f64(in, "conv weight");
    for (double& b : conv.bias) b = read_f64(in, "conv bias");
    return conv;
}

}  // namespace

void ToyParamGrads::add_scaled(const ToyParamGrads& other, double s) {
    for (size_t i = 0; i < stage_w.size(); ++i) {
        for (size_t j = 0; j < stage_w[i].size(); ++j)
            stage_w[i][j] += s * other.stage_w[i][j];
        for (size_t j = 0; j < stage_b[i].size(); ++j)
            stage_b[i][j] += s * other.stage_b[i][j];
    }
    for (size_t i = 0; i < head_w.size(); ++i) {
        for (size_t j = 0; j < head_w[i].size(); ++j)
            head_w[i][j] += s * other.head_w[i][j];
        for (size_t j = 0; j < head_b[i].size(); ++j)
            head_b[i][j] += s * other.head_b[i][j];
    }
}

void ToyParamGrads::scale(double s) {
    for (auto& block : stage_w)
        for (double& g : block) g *= s;
    for (auto& block : stage_b)
        for (double& g : block) g *= s;
    for (auto& block : head_w)
        for (double& g : block) g *= s;
    for (auto& block : head_b)
        for (double& g : block) g *= s;
}

ToyDetector::ToyDetector(int input_size, uint64_t seed)
    : input_size_(input_size) {
    if (input_size <= 0 || input_size % 32 != 0)
        throw ArgumentError("ToyDetector: input_size must be a positive "
                            "multiple of 32, got " +
                            std::to_string(input_size));
    build_architecture();
    Rng root(seed);
    for (size_t i = 0; i < stages_.size(); ++i) {
        Rng r = root.child(i);
        stages_[i].init_he(r);
    }
    for (size_t i = 0; i < heads_.size(); ++i) {
        Rng r = root.child(100 + i);
        heads_[i].init_he(r);
    }
}

void ToyDetector::build_architecture() {
    // Backbone: one stride-1 stem, then five stride-2 stages. Heads tap the
    // stage-3/4/5 outputs, i.e. strides 8, 16, 32.
    const int widths[6] = {8, 16, 32, 48, 64, 96};
    stages_.clear();
    int in_c = 3;
    for (int i = 0; i < 6; ++i) {
        stages_.emplace_back(in_c, widths[i], 3, i == 0 ? 1 : 2, 1);
        in_c = widths[i];
    }
    const int raw_channels =
        kToyAnchorsPerScale * (5 + static_cast<int>(classes_.size()));
    head_source_stage_ = {3, 4, 5};
    heads_.clear();
    for (int src : head_source_stage_)
        heads_.emplace_back(widths[src], raw_channels, 1, 1, 0);

    anchors_px_.assign(3, {});
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < kToyAnchorsPerScale; ++a)
            anchors_px_[s].push_back({kAnchorFractions[s][a][0] * input_size_,
                                      kAnchorFractions[s][a][1] * input_size_});
}

Tensor3 ToyDetector::image_to_tensor(const Image& image) const {
    if (image.height != input_size_ || image.width != input_size_ ||
        image.channels != 3)
        throw ArgumentError(
            "ToyDetector: expected 3x" + std::to_string(input_size_) + "x" +
            std::to_string(input_size_) + " input, got " +
            std::to_string(image.channels) + "x" + std::to_string(image.height) +
            "x" + std::to_string(image.width));
    Tensor3 t(3, input_size_, input_size_);
    for (int y = 0; y < input_size_; ++y)
        for (int x = 0; x < input_size_; ++x)
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = image.at(y, x, c);
    return t;
}

RawPrediction ToyDetector::run_forward(const Tensor3& input,
                                       ToyTape* tape) const {
    if (tape) {
        tape->input = input;
        tape->stage_out.clear();
        tape->stage_ctx.assign(stages_.size(), {});
        tape->head_ctx.assign(heads_.size(), {});
    }
    std::vector<Tensor3> stage_out;
    stage_out.reserve(stages_.size());
    const Tensor3* x = &input;
    for (size_t i = 0; i < stages_.size(); ++i) {
        ConvCtx* ctx = tape ? &tape->stage_ctx[i] : nullptr;
        Tensor3 pre = stages_[i].forward(*x, ctx);
        stage_out.push_back(LeakyRelu::forward(pre));
        x = &stage_out.back();
    }

    RawPrediction raw;
    raw.scales.resize(heads_.size());
    for (size_t h = 0; h < heads_.size(); ++h) {
        ConvCtx* ctx = tape ? &tape->head_ctx[h] : nullptr;
        ScalePrediction& sp = raw.scales[h];
        sp.stride = kToyStrides[h];
        sp.num_anchors = kToyAnchorsPerScale;
        sp.num_classes = static_cast<int>(classes_.size());
        sp.anchors_px = anchors_px_[h];
        sp.map = heads_[h].forward(stage_out[head_source_stage_[h]], ctx);
    }
    if (tape) tape->stage_out = std::move(stage_out);
    return raw;
}

RawPrediction ToyDetector::predict_raw(const Image& image) const {
    return run_forward(image_to_tensor(image), nullptr);
}

RawPrediction ToyDetector::forward(const Image& image, ToyTape& tape) const {
    return run_forward(image_to_tensor(image), &tape);
}

void ToyDetector::backward(const ToyTape& tape, const RawGrad& draw,
                           ToyParamGrads* param_grads,
                           Image* input_grad) const {
    if (draw.scales.size() != heads_.size())
        throw ArgumentError("ToyDetector::backward: raw gradient has " +
                            std::to_string(draw.scales.size()) +
                            " scales, detector has " +
                            std::to_string(heads_.size()));

    // Accumulated gradient w.r.t. each stage's post-activation output.
    std::vector<Tensor3> d_out(stages_.size());
    auto accumulate = [](Tensor3& acc, const Tensor3& g) {
        if (acc.size() == 0) {
            acc = g;
            return;
        }
        for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
    };

    for (size_t h = 0; h < heads_.size(); ++h) {
        Tensor3 d_feat;
        std::vector<double>* dw = param_grads ? &param_grads->head_w[h] : nullptr;
        std::vector<double>* db = param_grads ? &param_grads->head_b[h] : nullptr;
        heads_[h].backward(tape.head_ctx[h], draw.scales[h], &d_feat, dw, db);
        accumulate(d_out[head_source_stage_[h]], d_feat);
    }

    Tensor3 d_input;
    for (int i = static_cast<int>(stages_.size()) - 1; i >= 0; --i) {
        if (d_out[i].size() == 0) continue;
        Tensor3 d_pre = LeakyRelu::backward(tape.stage_out[i], d_out[i]);
        const bool need_dx = i > 0 || input_grad != nullptr;
        Tensor3 dx;
        std::vector<double>* dw = param_grads ? &param_grads->stage_w[i] : nullptr;
        std::vector<double>* db = param_grads ? &param_grads->stage_b[i] : nullptr;
        stages_[i].backward(tape.stage_ctx[i], d_pre, need_dx ? &dx : nullptr,
                            dw, db);
        if (i > 0)
            accumulate(d_out[i - 1], dx);
        else
            d_input = std::move(dx);
    }

    if (input_grad) {
        *input_grad = Image(input_size_, input_size_, 3);
        if (d_input.size() != 0)
            for (int y = 0; y < input_size_; ++y)
                for (int x = 0; x < input_size_; ++x)
                    for (int c = 0; c < 3; ++c)
                        input_grad->at(y, x, c) = d_input.at(c, y, x);
    }
}

ToyParamGrads ToyDetector::zero_grads() const {
    ToyParamGrads g;
    for (const Conv2d& conv : stages_) {
        g.stage_w.emplace_back(conv.weight.size(), 0.0);
        g.stage_b.emplace_back(conv.bias.size(), 0.0);
    }
    for (const Conv2d& conv : heads_) {
        g.head_w.emplace_back(conv.weight.size(), 0.0);
        g.head_b.emplace_back(conv.bias.size(), 0.0);
    }
    return g;
}

std::vector<double*> ToyDetector::param_blocks() {
    std::vector<double*> blocks;
    for (Conv2d& conv : stages_) {
        blocks.push_back(conv.weight.data());
        blocks.push_back(conv.bias.data());
    }
    for (Conv2d& conv : heads_) {
        blocks.push_back(conv.weight.data());
        blocks.push_back(conv.bias.data());
    }
    return blocks;
}

std::vector<size_t> ToyDetector::param_block_sizes() const {
    std::vector<size_t> sizes;
    for (const Conv2d& conv : stages_) {
        sizes.push_back(conv.weight.size());
        sizes.push_back(conv.bias.size());
    }
    for (const Conv2d& conv : heads_) {
        sizes.push_back(conv.weight.size());
        sizes.push_back(conv.bias.size());
    }
    return sizes;
}

void ToyDetector::apply_update(const ToyParamGrads& grads, double lr) {
    for (size_t i = 0; i < stages_.size(); ++i) {
        for (size_t j = 0; j < stages_[i].weight.size(); ++j)
            stages_[i].weight[j] -= lr * grads.stage_w[i][j];
        for (size_t j = 0; j < stages_[i].bias.size(); ++j)
            stages_[i].bias[j] -= lr * grads.stage_b[i][j];
    }
    for (size_t i = 0; i < heads_.size(); ++i) {
        for (size_t j = 0; j < heads_[i].weight.size(); ++j)
            heads_[i].weight[j] -= lr * grads.head_w[i][j];
        for (size_t j = 0; j < heads_[i].bias.size(); ++j)
            heads_[i].bias[j] -= lr * grads.head_b[i][j];
    }
}

void ToyDetector::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open detector checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_i32(out, input_size_);
    write_i32(out, static_cast<int32_t>(classes_.size()));
    for (const std::string& name : classes_) {
        write_i32(out, static_cast<int32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    write_i32(out, static_cast<int32_t>(anchors_px_.size()));
    for (const auto& scale : anchors_px_) {
        write_i32(out, static_cast<int32_t>(scale.size()));
        for (const auto& a : scale) {
            write_f64(out, a[0]);
            write_f64(out, a[1]);
        }
    }
    write_i32(out, static_cast<int32_t>(stages_.size()));
    for (const Conv2d& conv : stages_) write_conv(out, conv);
    write_i32(out, static_cast<int32_t>(heads_.size()));
    for (size_t h = 0; h < heads_.size(); ++h) {
        write_i32(out, head_source_stage_[h]);
        write_conv(out, heads_[h]);
    }
    if (!out) throw IoError("failed writing detector checkpoint: " + path);
}

ToyDetector ToyDetector::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open detector checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw ParseError("detector checkpoint: bad magic in " + path);

    ToyDetector det;
    det.input_size_ = read_i32(in, "input_size");
    if (det.input_size_ <= 0 || det.input_size_ % 32 != 0)
        throw ParseError("detector checkpoint: invalid input_size");
    const int n_classes = read_i32(in, "class count");
    if (n_classes <= 0 || n_classes > 1024)
        throw ParseError("detector checkpoint: invalid class count");
    det.classes_.clear();
    for (int i = 0; i < n_classes; ++i) {
        const int len = read_i32(in, "class name length");
        if (len < 0 || len > 4096)
            throw ParseError("detector checkpoint: invalid class name length");
        std::string name(static_cast<size_t>(len), '\0');
        in.read(name.data(), len);
        if (!in) throw ParseError("detector checkpoint: truncated class name");
        det.classes_.push_back(std::move(name));
    }
    const int n_scales = read_i32(in, "scale count");
    if (n_scales != 3)
        throw ParseError("detector checkpoint: expected 3 scales");
    det.anchors_px_.assign(n_scales, {});
    for (int s = 0; s < n_scales; ++s) {
        const int n_anchors = read_i32(in, "anchor count");
        if (n_anchors != kToyAnchorsPerScale)
            throw ParseError("detector checkpoint: unexpected anchor count");
        for (int a = 0; a < n_anchors; ++a) {
            const double w = read_f64(in, "anchor w");
            const double h = read_f64(in, "anchor h");
            det.anchors_px_[s].push_back({w, h});
        }
    }
    const int n_stages = read_i32(in, "stage count");
    if (n_stages <= 0 || n_stages > 64)
        throw ParseError("detector checkpoint: invalid stage count");
    for (int i = 0; i < n_stages; ++i) det.stages_.push_back(read_conv(in));
    const int n_heads = read_i32(in, "head count");
    if (n_heads != n_scales)
        throw ParseError("detector checkpoint: head/scale count mismatch");
    for (int h = 0; h < n_heads; ++h) {
        const int src = read_i32(in, "head source stage");
        if (src < 0 || src >= n_stages)
            throw ParseError("detector checkpoint: head source out of range");
        det.head_source_stage_.push_back(src);
        det.heads_.push_back(read_conv(in));
    }
    const int expect_channels =
        kToyAnchorsPerScale * (5 + static_cast<int>(det.classes_.size()));
    for (const Conv2d& head : det.heads_)
        if (head.out_c != expect_channels)
            throw ParseError("detector checkpoint: head channel mismatch");
    return det;
}

bool ToyDetector::same_parameters(const ToyDetector& other) const {
    if (stages_.size() != other.stages_.size() ||
        heads_.size() != other.heads_.size())
        return false;
    for (size_t i = 0; i < stages_.size(); ++i)
        if (stages_[i].weight != other.stages_[i].weight ||
            stages_[i].bias != other.stages_[i].bias)
            return false;
    for (size_t i = 0; i < heads_.size(); ++i)
        if (heads_[i].weight != other.heads_[i].weight ||
            heads_[i].bias != other.heads_[i].bias)
            return false;
    return true;
}

namespace {

struct ToyTraced : TracedForward {
    const ToyDetector* det;
    ToyTape tape;
    RawPrediction raw_;

    const RawPrediction& raw() const override { return raw_; }
    Image input_gradient(const RawGrad& upstream) const override {
        Image grad;
        det->backward(tape, upstream, nullptr, &grad);
        return grad;
    }
};

}  // namespace

std::unique_ptr<TracedForward> ToyDetector::predict_traced(
    const Image& image) const {
    auto traced = std::make_unique<ToyTraced>();
    traced->det = this;
    traced->raw_ = forward(image, traced->tape);
    return traced;
}

std::unique_ptr<DetectorAdapter> make_detector(
    const std::string& name, const std::string& checkpoint_path) {
    if (name == "toy")
        return std::make_unique<ToyDetector>(
            ToyDetector::load_checkpoint(checkpoint_path));
    throw ConfigError("unknown detector '" + name + "' (available: toy)");
}

int class_index_of(const DetectorAdapter& det, const std::string& name) {
    const auto& classes = det.class_names();
    for (size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == name) return static_cast<int>(i);
    throw ConfigError("detector has no class named '" + name + "'");
}

}  // namespace fca
