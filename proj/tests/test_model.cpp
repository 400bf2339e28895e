#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/kernels.hpp"
#include "ompadvisor/model.hpp"
#include "support.hpp"

using namespace ompadvisor;
namespace fs = std::filesystem;

namespace {

using Mat = std::vector<std::vector<double>>;

ModelConfig tiny_config() {
    ModelConfig c;
    c.d_model = 8;
    c.n_heads = 1;
    c.n_layers = 1;
    c.d_ff = 16;
    c.max_len = 8;
    c.vocab_size = 10;
    c.dropout_rate = 0.0f;
    c.seed = 21;
    return c;
}

// Straight-line reimplementation of the forward pass for one layer and one head.
Mat linear(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) {
    const std::size_t in = static_cast<std::size_t>(w.shape[0]);
    const std::size_t out = static_cast<std::size_t>(w.shape[1]);
    Mat y(x.size(), std::vector<double>(out));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t j = 0; j < out; ++j) {
            double s = b.data[j];
            for (std::size_t i = 0; i < in; ++i) {
                s += x[r][i] * w.data[i * out + j];
            }
            y[r][j] = s;
        }
    }
    return y;
}

Mat layer_norm(const Mat& x, const Tensor<double>& g, const Tensor<double>& b) {
    Mat y = x;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double n = static_cast<double>(x[r].size());
        double mean = 0.0;
        for (const double v : x[r]) {
            mean += v / n;
        }
        double var = 0.0;
        for (const double v : x[r]) {
            var += (v - mean) * (v - mean) / n;
        }
        for (std::size_t j = 0; j < x[r].size(); ++j) {
            y[r][j] = (x[r][j] - mean) / std::sqrt(var + 1e-5) * g.data[j] + b.data[j];
        }
    }
    return y;
}

std::array<double, 3> reference_forward(const ModelParams<double>& p, const ModelConfig& c, const EncodedInput& in,
                                        Mat* attention) {
    const std::size_t L = in.length();
    const std::size_t d = static_cast<std::size_t>(c.d_model);
    Mat x(L, std::vector<double>(d));
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x[i][j] = p[slot::tok_emb].data[static_cast<std::size_t>(in.ids[i]) * d + j] +
                      p[slot::pos_emb].data[static_cast<std::size_t>(in.positions[i]) * d + j];
        }
    }
    Mat h = layer_norm(x, p[slot::emb_ln_g], p[slot::emb_ln_b]);
    auto W = [&](slot::Layer t) -> const Tensor<double>& { return p[slot::layer(0, t)]; };
    const Mat q = linear(h, W(slot::Wq), W(slot::bq));
    const Mat k = linear(h, W(slot::Wk), W(slot::bk));
    const Mat v = linear(h, W(slot::Wv), W(slot::bv));
    Mat att(L, std::vector<double>(L));
    for (std::size_t i = 0; i < L; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < L; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                s += q[i][t] * k[j][t];
            }
            att[i][j] = s / std::sqrt(static_cast<double>(d)) + in.mask.at(i, j);
            mx = std::max(mx, att[i][j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            att[i][j] = std::exp(att[i][j] - mx);
            z += att[i][j];
        }
        for (std::size_t j = 0; j < L; ++j) {
            att[i][j] /= z;
        }
    }
    Mat ctx(L, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            for (std::size_t t = 0; t < d; ++t) {
                ctx[i][t] += att[i][j] * v[j][t];
            }
        }
    }
    const Mat a = linear(ctx, W(slot::Wo), W(slot::bo));
    Mat r = h;
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            r[i][j] += a[i][j];
        }
    }
    const Mat h1 = layer_norm(r, W(slot::ln1_g), W(slot::ln1_b));
    Mat u = linear(h1, W(slot::W1), W(slot::b1));
    for (auto& row : u) {
        for (auto& e : row) {
            e = 0.5 * e * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (e + 0.044715 * e * e * e)));
        }
    }
    const Mat g = linear(u, W(slot::W2), W(slot::b2));
    Mat r2 = h1;
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            r2[i][j] += g[i][j];
        }
    }
    const Mat out = layer_norm(r2, W(slot::ln2_g), W(slot::ln2_b));
    std::array<double, 3> probs{};
    for (std::size_t o = 0; o < 3; ++o) {
        double z = p[slot::head_b(1)].data[o];
        for (std::size_t j = 0; j < d; ++j) {
            z += out[0][j] * p[slot::head_w(1)].data[j * 3 + o];
        }
        probs[o] = 1.0 / (1.0 + std::exp(-z));
    }
    if (attention != nullptr) {
        *attention = att;
    }
    return probs;
}

EncodedInput four_token_input() {
    EncodedInput in;
    in.ids = {Vocabulary::kCls, 5, 7, Vocabulary::kSep};
    in.positions = {0, 1, 2, 0};
    in.n_code = 2;
    in.mask = build_attention_mask(2, {}, {});
    in.mask.values[1 * 4 + 2] = kMaskBlocked;
    in.mask.values[2 * 4 + 1] = kMaskBlocked;
    in.labels = {1, 0, 1};
    return in;
}

}  // namespace

TEST_CASE("loss examples") {
    CHECK(compute_loss({0.5, 0.5, 0.5}, {0, 1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(compute_loss({1.0, 0.0, 1.0}, {1, 0, 1}) <= 3e-7);
    CHECK(std::isfinite(compute_loss({0.0, 1.0, 0.0}, {1, 0, 1})));
}

TEST_CASE("gating and thresholds") {
    const Prediction gated = make_prediction({0.3, 0.9, 0.9}, true);
    CHECK(gated.labels == std::array<int, 3>{0, 0, 0});
    CHECK(gated.gated);
    const Prediction raw = make_prediction({0.3, 0.9, 0.9}, false);
    CHECK(raw.labels == std::array<int, 3>{0, 1, 1});
    CHECK_FALSE(raw.gated);
    CHECK_FALSE(make_prediction({0.3, 0.1, 0.2}, true).gated);
    CHECK(make_prediction({0.5, 0.5, 0.49}, true).labels == std::array<int, 3>{1, 1, 0});
    Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        const Prediction p = make_prediction({rng.uniform(), rng.uniform(), rng.uniform()}, true);
        if (p.labels[1] || p.labels[2]) {
            CHECK(p.labels[0] == 1);
        }
    }
}

TEST_CASE("forward matches a straight-line reimplementation") {
    const ModelConfig c = tiny_config();
    const auto params = init_params<double>(c);
    const EncodedInput in = four_token_input();
    Mat ref_att;
    const auto ref = reference_forward(params, c, in, &ref_att);
    const auto got = forward(params, c, in);
    for (std::size_t o = 0; o < 3; ++o) {
        CHECK(got.probs[o] == doctest::Approx(ref[o]).epsilon(1e-12));
        CHECK(got.probs[o] > 0.0);
        CHECK(got.probs[o] < 1.0);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(got.attention[0][0][i * 4 + j] == doctest::Approx(ref_att[i][j]).epsilon(1e-12));
        }
    }
    CHECK(got.attention[0][0][1 * 4 + 2] == 0.0);
}

TEST_CASE("forward with the 1/d scale differs only through the scores") {
    ModelConfig c = tiny_config();
    const auto params = init_params<double>(c);
    const auto sqrt_scale = forward(params, c, four_token_input());
    c.scale_by_d = true;
    const auto d_scale = forward(params, c, four_token_input());
    CHECK(sqrt_scale.probs != d_scale.probs);
}

TEST_CASE("fully masked off-diagonal gives identity attention and isolated rows") {
    ModelConfig c = tiny_config();
    c.n_heads = 2;
    const auto params = init_params<double>(c);
    EncodedInput in;
    in.ids = {Vocabulary::kCls, 6};
    in.positions = {0, 1};
    in.n_code = 1;
    in.mask.size = 2;
    in.mask.values = {0.0f, kMaskBlocked, kMaskBlocked, 0.0f};
    const auto r = forward(params, c, in);
    for (const auto& head : r.attention[0]) {
        CHECK(head == std::vector<double>{1.0, 0.0, 0.0, 1.0});
    }
    EncodedInput other = in;
    other.ids[1] = 8;
    CHECK(forward(params, c, other).probs == r.probs);

    // No gradient reaches the embedding of a token the CLS row cannot see.
    ModelParams<double> grads = zeros_like(params);
    forward_backward(params, c, in, DropoutSpec{}, grads);
    const std::size_t d = static_cast<std::size_t>(c.d_model);
    for (std::size_t j = 0; j < d; ++j) {
        CHECK(grads[slot::tok_emb].data[6 * d + j] == 0.0);
    }
}

TEST_CASE("forward rejects inputs that do not fit the config") {
    const ModelConfig c = tiny_config();
    const auto params = init_params<double>(c);
    EncodedInput in = four_token_input();
    in.ids.assign(9, 4);
    in.positions.assign(9, 0);
    in.mask = build_attention_mask(7, {}, {});
    CHECK_THROWS_AS(forward(params, c, in), ShapeError);
    EncodedInput bad_id = four_token_input();
    bad_id.ids[1] = 99;
    CHECK_THROWS_AS(forward(params, c, bad_id), ShapeError);
}

TEST_CASE("gradient check under both mask regimes and both scales") {
    ModelConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 16;
    c.max_len = 24;
    c.vocab_size = 20;
    c.dropout_rate = 0.0f;
    const auto params = init_params<double>(c, grad_check_weight_std(c));
    for (const bool all_open : {true, false}) {
        for (const bool by_d : {false, true}) {
            c.scale_by_d = by_d;
            const EncodedInput in = random_input(c, all_open ? 11 : 12, all_open);
            const auto report = check_gradients(params, c, in, 5, 20);
            CHECK(report.max_relative_error < 1e-3);
            CHECK(report.groups.size() == params.tensors.size());
        }
    }
    CHECK(relative_error(1e-12, -1e-12) == 0.0);
    CHECK(relative_error(1.0, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("loss falls on a memorized sample") {
    ModelConfig c;
    c.max_len = 8;
    c.vocab_size = 10;
    c.dropout_rate = 0.0f;
    auto params = init_params<float>(c);
    const EncodedInput in = four_token_input();
    Adam<float> adam(params, AdamOptions{});
    double first = 0.0;
    double at50 = 0.0;
    double last = 0.0;
    int steps = 0;
    for (; steps < 200; ++steps) {
        auto grads = zeros_like(params);
        last = forward_backward(params, c, in, DropoutSpec{}, grads);
        if (steps == 0) {
            first = last;
        }
        if (steps == 50) {
            at50 = last;
        }
        if (last < 0.01) {
            break;
        }
        adam.step(params, grads);
    }
    CHECK(at50 < first);
    CHECK(last < 0.01);
    CHECK(params.all_finite());
}

TEST_CASE("training is deterministic and independent of the thread count") {
    CorpusOptions co;
    co.seed = 2;
    const auto build = build_corpus(testsupport::fixture_dir() / "corpus_src", co);
    ModelConfig c;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 32;
    TrainOptions to;
    to.epochs = 2;
    to.batch_size = 8;
    to.min_freq = 1;
    to.aug = AugMode::curriculum;
    const int saved = kernel_threads();
    set_kernel_threads(1);
    const auto a = train(build.samples, c, to);
    set_kernel_threads(3);
    const auto b = train(build.samples, c, to);
    set_kernel_threads(saved);
    REQUIRE(a.model.params.tensors.size() == b.model.params.tensors.size());
    for (std::size_t t = 0; t < a.model.params.tensors.size(); ++t) {
        CHECK(a.model.params.tensors[t].data == b.model.params.tensors[t].data);
    }
    REQUIRE(a.history.size() == 2);
    CHECK(to_json(a.history[1]).dump() == to_json(b.history[1]).dump());
    CHECK(a.history[1].aug_fraction == doctest::Approx(0.1));

    std::vector<Sample> no_valid;
    for (const auto& s : build.samples) {
        if (s.split == Split::train) {
            no_valid.push_back(s);
        }
    }
    CHECK_THROWS_AS(train(no_valid, c, to), DataError);
}

TEST_CASE("model directory round trip and prediction") {
    CorpusOptions co;
    co.seed = 2;
    const auto build = build_corpus(testsupport::fixture_dir() / "corpus_src", co);
    ModelConfig c;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 32;
    TrainOptions to;
    to.epochs = 1;
    to.min_freq = 1;
    const auto trained = train(build.samples, c, to);
    const fs::path dir = fs::temp_directory_path() / "ompadvisor_test_model";
    fs::remove_all(dir);
    save_model(dir, trained.model, false);
    bool with_scope = true;
    const TrainedModel loaded = load_model(dir, &with_scope);
    CHECK_FALSE(with_scope);
    CHECK(loaded.vocab == trained.model.vocab);
    for (std::size_t t = 0; t < loaded.params.tensors.size(); ++t) {
        CHECK(loaded.params.tensors[t].data == trained.model.params.tensors[t].data);
    }
    const Sample& s = build.samples.front();
    CHECK(predict_probs(loaded, s) == predict_probs(trained.model, s));

    CHECK(predict_source(loaded, "int g;\nvoid f(void) { g = 1; }\n", "none.c", true, false).empty());
    const auto loops = predict_source(
        loaded, "void f(int n, double *a)\n{\n    int i;\n    for (i = 0; i < n; i++)\n        a[i] = 0;\n}\n", "one.c",
        true, false);
    REQUIRE(loops.size() == 1);
    CHECK(loops[0].line == 4);
    try {
        predict_source(loaded, "void f( {", "broken.c", false, false);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).rfind("broken.c:1:", 0) == 0);
    }

    {
        std::ofstream app(dir / "model.bin", std::ios::binary | std::ios::app);
        app << 'x';
    }
    CHECK_THROWS(load_model(dir));
}
