// Raw-grid decoding, NMS, target selection, and the toy detector's
// forward/backward and checkpoint machinery.
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fca/decode.hpp"
#include "fca/detector.hpp"
#include "fca/errors.hpp"
#include "fca/layers.hpp"
#include "fca/rng.hpp"
#include "fca/toy_detector.hpp"

using namespace fca;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "fca-test-detector";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

ScalePrediction make_scale(int stride, int grid, int num_anchors, int num_classes,
                           const std::vector<std::array<double, 2>>& anchors,
                           double fill = 0.0) {
    ScalePrediction s;
    s.stride = stride;
    s.num_anchors = num_anchors;
    s.num_classes = num_classes;
    s.anchors_px = anchors;
    s.map = Tensor3(num_anchors * (5 + num_classes), grid, grid, fill);
    return s;
}

void fill_random(Tensor3& t, Rng& rng, double lo, double hi) {
    for (double& v : t.data) v = rng.uniform(lo, hi);
}

Detection make_det(double x0, double y0, double x1, double y1, double obj,
                   double cls_prob, int marker = -1) {
    Detection d;
    d.box = {x0, y0, x1, y1};
    d.objectness = obj;
    d.class_probs = {cls_prob};
    d.cell_x = marker;  // lets tests track which input a kept copy came from
    return d;
}

// Index-based greedy NMS reference, written against the documented contract.
std::vector<size_t> ref_nms_indices(const std::vector<Detection>& dets,
                                    double iou_thr, double score_thr) {
    std::vector<size_t> order;
    for (size_t i = 0; i < dets.size(); ++i)
        if (dets[i].score() >= score_thr) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return dets[a].score() > dets[b].score();
    });
    std::vector<size_t> kept;
    for (size_t i : order) {
        bool ok = true;
        for (size_t k : kept)
            if (iou(dets[i].box, dets[k].box) > iou_thr) ok = false;
        if (ok) kept.push_back(i);
    }
    return kept;
}

double oracle_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Image random_input(int size, uint64_t seed) {
    Image img(size, size, 3);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

double weighted_sum(const RawPrediction& raw, const RawGrad& g) {
    double acc = 0.0;
    for (size_t s = 0; s < raw.scales.size(); ++s)
        for (size_t i = 0; i < raw.scales[s].map.data.size(); ++i)
            acc += raw.scales[s].map.data[i] * g.scales[s].data[i];
    return acc;
}

}  // namespace

TEST_CASE("zero logits decode to anchor-sized boxes at cell centres") {
    ScalePrediction s = make_scale(8, 2, 1, 2, {{4.0, 4.0}});
    const std::vector<Detection> dets = decode_scale(s, 16, 16);
    REQUIRE(dets.size() == 4u);

    // Scan order is cell row, cell column, then anchor.
    CHECK(dets[0].cell_y == 0);
    CHECK(dets[0].cell_x == 0);
    CHECK(dets[1].cell_y == 0);
    CHECK(dets[1].cell_x == 1);
    CHECK(dets[2].cell_y == 1);
    CHECK(dets[2].cell_x == 0);

    // Cell (0,0): centre (0 + sigmoid 0) * 8 = 4, size = prior.
    CHECK(dets[0].box.x_min == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(dets[0].box.y_min == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(dets[0].box.x_max == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(dets[0].box.y_max == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(dets[0].objectness == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(dets[0].class_probs.size() == 2u);
    CHECK(dets[0].class_probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dets[0].class_probs[1] == doctest::Approx(0.5).epsilon(1e-12));

    // Cell (1,1): centre at 12 px.
    CHECK(dets[3].box.x_min == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(dets[3].box.y_max == doctest::Approx(14.0).epsilon(1e-12));

    // A huge size logit is clamped, and the box to the image rectangle.
    s.map.at(kFieldTw, 0, 0) = 1e6;
    const std::vector<Detection> big = decode_scale(s, 16, 16);
    CHECK(big[0].box.x_min == 0.0);
    CHECK(big[0].box.x_max == 16.0);
    CHECK(std::isfinite(big[0].box.x_max));
}

TEST_CASE("encode_box inverts decoding inside a cell") {
    ScalePrediction s = make_scale(8, 4, 2, 1, {{6.0, 10.0}, {12.0, 5.0}});
    Rng rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        const int anchor = trial % 2;
        const int cy = 1, cx = 1;
        const double fx = rng.uniform(0.05, 0.95);
        const double fy = rng.uniform(0.05, 0.95);
        const double w = rng.uniform(2.0, 12.0);
        const double h = rng.uniform(2.0, 12.0);
        const double centre_x = (cx + fx) * 8.0;
        const double centre_y = (cy + fy) * 8.0;
        const Box gt{centre_x - w / 2, centre_y - h / 2, centre_x + w / 2,
                     centre_y + h / 2};

        const EncodedBox e = encode_box(gt, s, anchor, cy, cx);
        std::fill(s.map.data.begin(), s.map.data.end(), 0.0);
        const int base = anchor * (5 + 1);
        s.map.at(base + kFieldTx, cy, cx) = e.tx;
        s.map.at(base + kFieldTy, cy, cx) = e.ty;
        s.map.at(base + kFieldTw, cy, cx) = e.tw;
        s.map.at(base + kFieldTh, cy, cx) = e.th;

        const std::vector<Detection> dets = decode_scale(s, 32, 32);
        const Detection& d = dets[static_cast<size_t>((cy * 4 + cx) * 2 + anchor)];
        REQUIRE(d.cell_y == cy);
        REQUIRE(d.cell_x == cx);
        REQUIRE(d.anchor_index == anchor);
        CHECK(std::abs(d.box.x_min - gt.x_min) < 1e-5);
        CHECK(std::abs(d.box.y_min - gt.y_min) < 1e-5);
        CHECK(std::abs(d.box.x_max - gt.x_max) < 1e-5);
        CHECK(std::abs(d.box.y_max - gt.y_max) < 1e-5);
    }

    // Centres on a cell boundary cannot be encoded.
    CHECK_THROWS_AS(encode_box(Box{6.0, 6.0, 10.0, 10.0}, s, 0, 1, 1),
                    ArgumentError);  // centre (8,8) sits on the cell corner
}

TEST_CASE("decoding matches a straight-line oracle on random logits") {
    ScalePrediction s = make_scale(16, 3, 2, 4, {{5.0, 9.0}, {11.0, 7.0}});
    Rng rng(87);
    fill_random(s.map, rng, -3.0, 3.0);
    const int H = 48, W = 48;
    const std::vector<Detection> dets = decode_scale(s, H, W);
    REQUIRE(dets.size() == 3u * 3u * 2u);

    size_t i = 0;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
            for (int a = 0; a < 2; ++a, ++i) {
                const int base = a * 9;
                const double cx = (x + oracle_sigmoid(s.map.at(base + 0, y, x))) * 16.0;
                const double cy = (y + oracle_sigmoid(s.map.at(base + 1, y, x))) * 16.0;
                const double w = s.anchors_px[a][0] * std::exp(s.map.at(base + 2, y, x));
                const double h = s.anchors_px[a][1] * std::exp(s.map.at(base + 3, y, x));
                auto clamp01 = [](double v, double hi) {
                    return std::min(std::max(v, 0.0), hi);
                };
                const Detection& d = dets[i];
                CHECK(std::abs(d.box.x_min - clamp01(cx - w / 2, W)) < 1e-12);
                CHECK(std::abs(d.box.y_min - clamp01(cy - h / 2, H)) < 1e-12);
                CHECK(std::abs(d.box.x_max - clamp01(cx + w / 2, W)) < 1e-12);
                CHECK(std::abs(d.box.y_max - clamp01(cy + h / 2, H)) < 1e-12);
                CHECK(std::abs(d.objectness - oracle_sigmoid(s.map.at(base + 4, y, x))) <
                      1e-12);
                for (int c = 0; c < 4; ++c)
                    CHECK(std::abs(d.class_probs[c] -
                                   oracle_sigmoid(s.map.at(base + 5 + c, y, x))) < 1e-12);
                CHECK(d.anchor_index == a);
                CHECK(d.cell_y == y);
                CHECK(d.cell_x == x);
            }

    // decode_all concatenates scales in order and stamps scale_index.
    RawPrediction raw;
    raw.scales.push_back(s);
    ScalePrediction s2 = make_scale(32, 2, 1, 4, {{20.0, 20.0}});
    fill_random(s2.map, rng, -3.0, 3.0);
    raw.scales.push_back(s2);
    const std::vector<Detection> all = decode_all(raw, H, W);
    REQUIRE(all.size() == 18u + 4u);
    CHECK(all[0].scale_index == 0);
    CHECK(all[17].scale_index == 0);
    CHECK(all[18].scale_index == 1);
    CHECK(all[18].box.x_min == decode_scale(s2, H, W)[0].box.x_min);
}

TEST_CASE("NMS keeps the right boxes in the simple cases") {
    CHECK(nms({}, 0.5, 0.25).empty());

    const Detection lone = make_det(0, 0, 10, 10, 0.9, 1.0);
    CHECK(nms({lone}, 0.5, 0.25).size() == 1u);

    // Below the score threshold boxes are dropped before anything else.
    CHECK(nms({make_det(0, 0, 10, 10, 0.9, 0.2)}, 0.5, 0.25).empty());

    // Disjoint boxes are all kept, in descending score order.
    const std::vector<Detection> disjoint = {make_det(0, 0, 5, 5, 0.5, 1.0, 0),
                                             make_det(20, 20, 25, 25, 0.9, 1.0, 1)};
    const std::vector<Detection> kept = nms(disjoint, 0.5, 0.25);
    REQUIRE(kept.size() == 2u);
    CHECK(kept[0].cell_x == 1);
    CHECK(kept[1].cell_x == 0);

    // Heavy overlap suppresses the weaker box.
    const std::vector<Detection> overlapping = {
        make_det(0, 0, 10, 10, 0.8, 1.0, 0), make_det(1, 0, 11, 10, 0.9, 1.0, 1)};
    const std::vector<Detection> one = nms(overlapping, 0.5, 0.25);
    REQUIRE(one.size() == 1u);
    CHECK(one[0].cell_x == 1);

    // IoU exactly at the threshold does NOT suppress (strict comparison).
    const std::vector<Detection> at_thr = {make_det(0, 0, 10, 10, 0.9, 1.0, 0),
                                           make_det(0, 0, 10, 5, 0.8, 1.0, 1)};
    CHECK(iou(at_thr[0].box, at_thr[1].box) == 0.5);
    CHECK(nms(at_thr, 0.5, 0.25).size() == 2u);

    // Equal scores: the earlier input index wins.
    const std::vector<Detection> tied = {make_det(0, 0, 10, 10, 0.7, 1.0, 0),
                                         make_det(0, 0, 10, 10, 0.7, 1.0, 1)};
    const std::vector<Detection> first = nms(tied, 0.5, 0.25);
    REQUIRE(first.size() == 1u);
    CHECK(first[0].cell_x == 0);
}

TEST_CASE("NMS agrees with a greedy reference on 200 random sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        CAPTURE(trial);
        const int n = 1 + rng.uniform_int(40);
        std::vector<Detection> dets;
        for (int i = 0; i < n; ++i) {
            const double x0 = rng.uniform(0.0, 40.0);
            const double y0 = rng.uniform(0.0, 40.0);
            Detection d = make_det(x0, y0, x0 + rng.uniform(1.0, 15.0),
                                   y0 + rng.uniform(1.0, 15.0), rng.uniform(),
                                   rng.uniform(), i);
            // Inject exact score ties (and sometimes identical boxes).
            if (!dets.empty() && rng.uniform() < 0.3) {
                const Detection& src = dets[static_cast<size_t>(
                    rng.uniform_int(static_cast<int>(dets.size())))];
                d.objectness = src.objectness;
                d.class_probs = src.class_probs;
                if (rng.uniform() < 0.5) d.box = src.box;
            }
            dets.push_back(std::move(d));
        }
        const double iou_thr = rng.uniform(0.2, 0.7);
        const double score_thr = rng.uniform(0.0, 0.5);

        const std::vector<Detection> got = nms(dets, iou_thr, score_thr);
        const std::vector<size_t> want = ref_nms_indices(dets, iou_thr, score_thr);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i) {
            const Detection& w = dets[want[i]];
            CHECK(got[i].cell_x == w.cell_x);  // same input element, same order
            CHECK(got[i].box.x_min == w.box.x_min);
            CHECK(got[i].score() == w.score());
        }
        // Postconditions: scores above threshold, descending, survivors
        // pairwise below the IoU threshold.
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].score() >= score_thr);
            if (i > 0) CHECK(got[i - 1].score() >= got[i].score());
            for (size_t j = i + 1; j < got.size(); ++j)
                CHECK(iou(got[i].box, got[j].box) <= iou_thr);
        }
    }
}

TEST_CASE("target selection maximises obj*cls among overlapping boxes") {
    RawPrediction raw;
    raw.scales.push_back(make_scale(8, 4, 2, 4, {{6.0, 6.0}, {14.0, 10.0}}));
    raw.scales.push_back(make_scale(16, 2, 2, 4, {{18.0, 14.0}, {28.0, 24.0}}));
    Rng rng(55);
    for (auto& s : raw.scales) fill_random(s.map, rng, -2.0, 2.0);

    const Box gt{10.0, 10.0, 22.0, 20.0};
    const int target = 1;
    const std::vector<std::optional<Detection>> picks =
        select_target_predictions(raw, gt, target, 32, 32);
    REQUIRE(picks.size() == 2u);

    for (size_t s = 0; s < 2; ++s) {
        CAPTURE(s);
        const std::vector<Detection> dets = decode_scale(raw.scales[s], 32, 32);
        double best = -1.0;
        int best_idx = -1;
        for (size_t i = 0; i < dets.size(); ++i) {
            if (iou(dets[i].box, gt) <= 0.0) continue;
            const double v = dets[i].objectness * dets[i].class_probs[target];
            if (v > best) {
                best = v;
                best_idx = static_cast<int>(i);
            }
        }
        REQUIRE(picks[s].has_value() == (best_idx >= 0));
        if (best_idx >= 0) {
            CHECK(picks[s]->cell_y == dets[static_cast<size_t>(best_idx)].cell_y);
            CHECK(picks[s]->cell_x == dets[static_cast<size_t>(best_idx)].cell_x);
            CHECK(picks[s]->anchor_index ==
                  dets[static_cast<size_t>(best_idx)].anchor_index);
            CHECK(picks[s]->scale_index == static_cast<int>(s));
            CHECK(std::abs(picks[s]->objectness * picks[s]->class_probs[target] -
                           best) < 1e-15);
        }
    }

    // Forcing every scale-1 box to (near) zero size leaves nothing
    // overlapping the ground truth there.
    for (int a = 0; a < 2; ++a)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                raw.scales[1].map.at(a * 9 + kFieldTw, y, x) = -40.0;
                raw.scales[1].map.at(a * 9 + kFieldTh, y, x) = -40.0;
            }
    const std::vector<std::optional<Detection>> sparse =
        select_target_predictions(raw, gt, target, 32, 32);
    CHECK(sparse[0].has_value());
    CHECK_FALSE(sparse[1].has_value());
}

TEST_CASE("the toy detector produces the documented grid shapes") {
    const ToyDetector det(64, 5);
    CHECK(det.input_size() == 64);
    CHECK(det.class_names() == kToyClasses);
    CHECK(det.supports_input_gradient());

    const Image img = random_input(64, 17);
    const RawPrediction raw = det.predict_raw(img);
    REQUIRE(raw.scales.size() == 3u);
    for (size_t s = 0; s < 3; ++s) {
        const ScalePrediction& sp = raw.scales[s];
        CHECK(sp.stride == kToyStrides[s]);
        CHECK(sp.num_anchors == kToyAnchorsPerScale);
        CHECK(sp.num_classes == 4);
        CHECK(sp.grid_h() == 64 / kToyStrides[s]);
        CHECK(sp.grid_w() == 64 / kToyStrides[s]);
        CHECK(sp.map.channels == 3 * (5 + 4));
        REQUIRE(sp.anchors_px.size() == 3u);
        for (const auto& a : sp.anchors_px) {
            CHECK(a[0] > 0.0);
            CHECK(a[1] > 0.0);
        }
        CHECK(sp.anchors_px == det.anchors(static_cast<int>(s)));
    }

    // Bitwise deterministic forward; seeds change the parameters.
    const RawPrediction again = det.predict_raw(img);
    for (size_t s = 0; s < 3; ++s)
        CHECK(raw.scales[s].map.data == again.scales[s].map.data);
    CHECK(ToyDetector(64, 5).same_parameters(det));
    CHECK_FALSE(ToyDetector(64, 6).same_parameters(det));

    CHECK_THROWS_AS(ToyDetector(0, 1), ArgumentError);
    CHECK_THROWS_AS(ToyDetector(-32, 1), ArgumentError);
    CHECK_THROWS_AS(ToyDetector(48, 1), ArgumentError);  // not a multiple of 32
    CHECK_THROWS_AS(det.predict_raw(random_input(32, 1)), ArgumentError);
}

TEST_CASE("detector checkpoints round-trip and reject corruption") {
    const ToyDetector det(64, 99);
    const std::string path = (test_dir() / "toy.ckpt").string();
    det.save_checkpoint(path);

    const ToyDetector back = ToyDetector::load_checkpoint(path);
    CHECK(back.same_parameters(det));
    CHECK(back.input_size() == 64);
    const Image img = random_input(64, 3);
    const RawPrediction a = det.predict_raw(img);
    const RawPrediction b = back.predict_raw(img);
    for (size_t s = 0; s < 3; ++s)
        CHECK(a.scales[s].map.data == b.scales[s].map.data);

    CHECK_THROWS_AS(ToyDetector::load_checkpoint((test_dir() / "nope.ckpt").string()),
                    IoError);

    // Flip the magic.
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
    }
    REQUIRE(bytes.size() > 64u);
    std::string bad = bytes;
    bad[0] = 'X';
    const std::string bad_path = (test_dir() / "bad-magic.ckpt").string();
    std::ofstream(bad_path, std::ios::binary).write(bad.data(),
                                                    static_cast<long>(bad.size()));
    CHECK_THROWS_AS(ToyDetector::load_checkpoint(bad_path), ParseError);

    // Truncate half-way.
    const std::string trunc_path = (test_dir() / "trunc.ckpt").string();
    std::ofstream(trunc_path, std::ios::binary)
        .write(bytes.data(), static_cast<long>(bytes.size() / 2));
    CHECK_THROWS_AS(ToyDetector::load_checkpoint(trunc_path), ParseError);
}

TEST_CASE("the registry resolves toy detectors and rejects unknown names") {
    const ToyDetector det(64, 4);
    const std::string path = (test_dir() / "registry.ckpt").string();
    det.save_checkpoint(path);

    const std::unique_ptr<DetectorAdapter> adapter = make_detector("toy", path);
    REQUIRE(adapter);
    CHECK(adapter->input_size() == 64);
    const Image img = random_input(64, 12);
    const RawPrediction a = adapter->predict_raw(img);
    const RawPrediction b = det.predict_raw(img);
    for (size_t s = 0; s < 3; ++s)
        CHECK(a.scales[s].map.data == b.scales[s].map.data);

    CHECK_THROWS_AS(make_detector("yolo9000", path), ConfigError);

    CHECK(class_index_of(*adapter, "car") == 0);
    CHECK(class_index_of(*adapter, "truck") == 1);
    CHECK(class_index_of(*adapter, "person") == 2);
    CHECK(class_index_of(*adapter, "distractor") == 3);
    CHECK_THROWS_AS(class_index_of(*adapter, "bicycle"), ConfigError);
}

TEST_CASE("traced forward pushes raw gradients back to input pixels") {
    const ToyDetector det(64, 11);
    const Image img = random_input(64, 21);

    const std::unique_ptr<TracedForward> traced = det.predict_traced(img);
    const RawPrediction& raw = traced->raw();

    RawGrad g = RawGrad::zeros_like(raw);
    Rng grng(31);
    for (Tensor3& t : g.scales)
        for (double& v : t.data) v = grng.uniform(-1.0, 1.0);

    const Image input_grad = traced->input_gradient(g);
    REQUIRE(input_grad.height == 64);
    REQUIRE(input_grad.width == 64);
    REQUIRE(input_grad.channels == 3);

    // The traced raw equals the plain forward.
    const RawPrediction plain = det.predict_raw(img);
    for (size_t s = 0; s < 3; ++s)
        CHECK(raw.scales[s].map.data == plain.scales[s].map.data);

    // Central differences on a handful of pixels.
    Rng pick(77);
    const double h = 1e-3;
    for (int k = 0; k < 10; ++k) {
        const int y = pick.uniform_int(64);
        const int x = pick.uniform_int(64);
        const int c = pick.uniform_int(3);
        CAPTURE(y);
        CAPTURE(x);
        CAPTURE(c);
        Image probe = img;
        probe.at(y, x, c) = img.at(y, x, c) + h;
        const double s_plus = weighted_sum(det.predict_raw(probe), g);
        probe.at(y, x, c) = img.at(y, x, c) - h;
        const double s_minus = weighted_sum(det.predict_raw(probe), g);
        const double fd = (s_plus - s_minus) / (2.0 * h);
        const double analytic = input_grad.at(y, x, c);
        CHECK(std::abs(fd - analytic) <= 1e-6 + 1e-3 * std::abs(analytic));
    }
}

TEST_CASE("conv and activation backward passes match finite differences") {
    Rng rng(63);

    SUBCASE("3x3 stride-1 convolution") {
        Conv2d conv(2, 3, 3, 1, 1);
        conv.init_he(rng);
        Tensor3 x(2, 5, 4);
        fill_random(x, rng, -1.0, 1.0);
        Tensor3 dy(3, 5, 4);
        fill_random(dy, rng, -1.0, 1.0);

        ConvCtx ctx;
        (void)conv.forward(x, &ctx);
        Tensor3 dx(2, 5, 4);
        std::vector<double> dw(conv.weight.size(), 0.0);
        std::vector<double> db(conv.bias.size(), 0.0);
        conv.backward(ctx, dy, &dx, &dw, &db);

        auto loss = [&](const Conv2d& c, const Tensor3& in) {
            const Tensor3 y = c.forward(in);
            double acc = 0.0;
            for (size_t i = 0; i < y.data.size(); ++i) acc += y.data[i] * dy.data[i];
            return acc;
        };
        const double h = 1e-5;
        for (size_t i = 0; i < x.data.size(); ++i) {
            Tensor3 xp = x, xm = x;
            xp.data[i] += h;
            xm.data[i] -= h;
            const double fd = (loss(conv, xp) - loss(conv, xm)) / (2.0 * h);
            CHECK(std::abs(fd - dx.data[i]) < 1e-6);
        }
        for (size_t i = 0; i < conv.weight.size(); ++i) {
            Conv2d cp = conv, cm = conv;
            cp.weight[i] += h;
            cm.weight[i] -= h;
            const double fd = (loss(cp, x) - loss(cm, x)) / (2.0 * h);
            CHECK(std::abs(fd - dw[i]) < 1e-6);
        }
        for (size_t i = 0; i < conv.bias.size(); ++i) {
            Conv2d cp = conv, cm = conv;
            cp.bias[i] += h;
            cm.bias[i] -= h;
            const double fd = (loss(cp, x) - loss(cm, x)) / (2.0 * h);
            CHECK(std::abs(fd - db[i]) < 1e-6);
        }
    }

    SUBCASE("3x3 stride-2 convolution input gradient") {
        Conv2d conv(1, 2, 3, 2, 1);
        conv.init_he(rng);
        Tensor3 x(1, 6, 6);
        fill_random(x, rng, -1.0, 1.0);
        ConvCtx ctx;
        const Tensor3 y = conv.forward(x, &ctx);
        CHECK(y.height == 3);
        CHECK(y.width == 3);
        Tensor3 dy(2, 3, 3);
        fill_random(dy, rng, -1.0, 1.0);
        Tensor3 dx(1, 6, 6);
        conv.backward(ctx, dy, &dx, nullptr, nullptr);

        const double h = 1e-5;
        for (size_t i = 0; i < x.data.size(); ++i) {
            Tensor3 xp = x, xm = x;
            xp.data[i] += h;
            xm.data[i] -= h;
            auto dot = [&](const Tensor3& in) {
                const Tensor3 out = conv.forward(in);
                double acc = 0.0;
                for (size_t j = 0; j < out.data.size(); ++j)
                    acc += out.data[j] * dy.data[j];
                return acc;
            };
            CHECK(std::abs((dot(xp) - dot(xm)) / (2.0 * h) - dx.data[i]) < 1e-6);
        }
    }

    SUBCASE("leaky relu forward and backward") {
        Tensor3 x(1, 2, 3);
        x.data = {1.5, -2.0, 0.25, -0.75, 3.0, -0.1};
        const Tensor3 y = LeakyRelu::forward(x);
        CHECK(y.data[0] == 1.5);
        CHECK(y.data[1] == -0.2);
        CHECK(y.data[2] == 0.25);
        CHECK(y.data[3] == doctest::Approx(-0.075).epsilon(1e-12));

        Tensor3 dy(1, 2, 3, 1.0);
        dy.data = {2.0, 2.0, -1.0, 4.0, 0.5, 1.0};
        const Tensor3 dx = LeakyRelu::backward(x, dy);
        CHECK(dx.data[0] == 2.0);                             // positive side
        CHECK(dx.data[1] == doctest::Approx(0.2).epsilon(1e-12));  // negative side
        CHECK(dx.data[2] == -1.0);
        CHECK(dx.data[3] == doctest::Approx(0.4).epsilon(1e-12));
    }
}
