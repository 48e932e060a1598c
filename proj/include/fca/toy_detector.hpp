// toy_detector.hpp — a small single-stage, anchor-based detector with three
// output scales (strides 8/16/32) and three anchors per scale. The backbone
// is a plain conv stack; each scale gets a 1×1 head producing the
// anchors * (5 + classes) raw channels described in detector.hpp.
//
// The whole network is written with explicit forward/backward so the attack
// can differentiate through it to the input image and training can reach the
// parameters. Everything is double precision and deterministic.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "fca/detector.hpp"
#include "fca/layers.hpp"

namespace fca {

inline const std::vector<std::string> kToyClasses = {"car", "truck", "person",
                                                     "distractor"};
inline constexpr int kToyAnchorsPerScale = 3;
inline constexpr std::array<int, 3> kToyStrides = {8, 16, 32};

// Activations captured during a forward pass, enough to run backward.
struct ToyTape {
    Tensor3 input;
    std::vector<Tensor3> stage_out;   // post-activation output per stage
    std::vector<ConvCtx> stage_ctx;   // im2col buffers per backbone conv
    std::vector<ConvCtx> head_ctx;    // one per scale head
};

struct ToyParamGrads {
    std::vector<std::vector<double>> stage_w, head_w;
    std::vector<std::vector<double>> stage_b, head_b;

    void add_scaled(const ToyParamGrads& other, double scale);
    void scale(double s);
};

class ToyDetector : public DetectorAdapter {
  public:
    // Fresh network with seeded He-initialised weights. input_size must be a
    // positive multiple of 32.
    ToyDetector(int input_size, uint64_t seed);

    const std::vector<std::string>& class_names() const override {
        return classes_;
    }
    int input_size() const override { return input_size_; }
    RawPrediction predict_raw(const Image& image) const override;
    bool supports_input_gradient() const override { return true; }
    std::unique_ptr<TracedForward> predict_traced(
        const Image& image) const override;

    // Training-facing API -------------------------------------------------
    RawPrediction forward(const Image& image, ToyTape& tape) const;
    // Routes draw back through the tape; any of the outputs may be null.
    void backward(const ToyTape& tape, const RawGrad& draw,
                  ToyParamGrads* param_grads, Image* input_grad) const;

    ToyParamGrads zero_grads() const;
    // Flat parameter views used by the optimiser: stages first, then heads,
    // weights before biases within each layer.
    std::vector<double*> param_blocks();
    std::vector<size_t> param_block_sizes() const;
    void apply_update(const ToyParamGrads& grads, double lr);  // plain SGD

    const std::vector<std::array<double, 2>>& anchors(int scale) const {
        return anchors_px_[scale];
    }
    int num_scales() const { return 3; }

    void save_checkpoint(const std::string& path) const;
    static ToyDetector load_checkpoint(const std::string& path);

    bool same_parameters(const ToyDetector& other) const;

  private:
    ToyDetector() = default;
    void build_architecture();
    Tensor3 image_to_tensor(const Image& image) const;
    RawPrediction run_forward(const Tensor3& input, ToyTape* tape) const;

    int input_size_ = 0;
    std::vector<std::string> classes_ = kToyClasses;
    std::vector<Conv2d> stages_;           // backbone convs, each + leaky ReLU
    std::vector<Conv2d> heads_;            // 1×1 heads, linear
    std::vector<int> head_source_stage_;   // backbone stage index per head
    std::vector<std::vector<std::array<double, 2>>> anchors_px_;
};

}  // namespace fca
