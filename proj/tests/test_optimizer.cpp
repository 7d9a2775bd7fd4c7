#include <cmath>

#include <gtest/gtest.h>

#include "adapt/checkpoint.hpp"
#include "adapt/optimizer.hpp"
#include "test_util.hpp"

using namespace adapt;

namespace {

// Single scalar parameter w, exposed as a 1x1 linear head without bias use.
Model<double> scalar_model(double w) {
    Model<double> m;
    m.input_width = 1;
    m.head = LinearHead<double>{MatrixT<double>::Constant(1, 1, w), VectorT<double>::Zero(1)};
    return m;
}

double& weight_of(Model<double>& m) { return std::get<LinearHead<double>>(m.head).weight(0, 0); }

Gradients<double> grad_for(const Model<double>& m, double g) {
    auto grads = Gradients<double>::zeros_like(m);
    grads.head_weight(0, 0) = g;
    return grads;
}

}  // namespace

TEST(Optimizer, SgdFirstStepIsMinusLrTimesGrad) {
    auto m = scalar_model(0.0);
    OptimizerSpec spec{OptimizerKind::sgd, 0.1, 0.1, 0.7, 0.0};
    auto state = OptimizerState<double>::for_model(m);
    optimizer_step(m, grad_for(m, 1.0), spec, state);
    EXPECT_DOUBLE_EQ(weight_of(m), -0.1);
}

TEST(Optimizer, DecoupledDecayWithZeroGrad) {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
        auto m = scalar_model(2.0);
        const double lr = 0.05, d = 1e-3;
        OptimizerSpec spec{kind, lr, lr, 0.9, d};
        auto state = OptimizerState<double>::for_model(m);
        optimizer_step(m, grad_for(m, 0.0), spec, state);
        EXPECT_DOUBLE_EQ(weight_of(m), 2.0 - lr * d * 2.0);
    }
}

TEST(Optimizer, SeparateLearningRatesPerGroup) {
    auto m = make_model<double>(2, {3}, 2, 5, false);
    auto before = m;
    auto grads = Gradients<double>::zeros_like(m);
    grads.layers[0].weight.setOnes();
    grads.head_weight.setOnes();
    OptimizerSpec spec{OptimizerKind::sgd, 0.5, 0.25, 0.0, 0.0};
    auto state = OptimizerState<double>::for_model(m);
    optimizer_step(m, grads, spec, state);
    EXPECT_NEAR(m.encoder[0].weight(0, 0), before.encoder[0].weight(0, 0) - 0.25, 1e-15);
    EXPECT_NEAR(std::get<LinearHead<double>>(m.head).weight(0, 0),
                std::get<LinearHead<double>>(before.head).weight(0, 0) - 0.5, 1e-15);
}

// Hand-rolled Adam on f(w) = w^2 from w = 1, lr = 0.1.
TEST(Optimizer, AdamMatchesReferenceTrace) {
    auto m = scalar_model(1.0);
    OptimizerSpec spec{OptimizerKind::adam, 0.1, 0.1, 0.9, 0.0};
    auto state = OptimizerState<double>::for_model(m);
    double w = 1.0, mom = 0.0, vel = 0.0;
    for (int t = 1; t <= 10; ++t) {
        const double g = 2 * w;
        mom = 0.9 * mom + 0.1 * g;
        vel = 0.999 * vel + 0.001 * g * g;
        const double mhat = mom / (1 - std::pow(0.9, t));
        const double vhat = vel / (1 - std::pow(0.999, t));
        w -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);

        optimizer_step(m, grad_for(m, 2 * weight_of(m)), spec, state);
        EXPECT_NEAR(weight_of(m), w, 1e-12) << "step " << t;
    }
}

TEST(Optimizer, UninitializedStateThrows) {
    auto m = scalar_model(1.0);
    OptimizerState<double> state;
    EXPECT_THROW(optimizer_step(m, grad_for(m, 1.0), OptimizerSpec{}, state), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    auto m = make_model<float>(5, {6, 4}, 3, 17);
    auto md = cast_model<double>(m);
    test::randomize_batch_norm(md, 3);
    m = cast_model<float>(md);
    m.power_scale = PowerScale<float>{0.7f};
    const std::string text = encode_model(m);
    const auto back = decode_model(text);
    EXPECT_TRUE(test::bit_identical(m, back));
    EXPECT_EQ(encode_model(back), text);

    m.head = PrototypeHead<float>{Matrix::Constant(3, 4, 0.25f), 12.5f};
    const auto back2 = decode_model(encode_model(m));
    EXPECT_TRUE(test::bit_identical(m, back2));
}

TEST(Checkpoint, RejectsWrongSchemaAndShapes) {
    auto m = make_model<float>(3, {4}, 2, 1);
    auto doc = model_to_json(m);
    auto bad = doc;
    bad["schema"] = "map-model/0";
    EXPECT_THROW(model_from_json(bad), ConfigError);
    bad = doc;
    bad["encoder"][0]["out"] = 5;
    EXPECT_THROW(model_from_json(bad), ConfigError);
    bad = doc;
    bad["head"]["weight"] = "AAAA";
    try {
        model_from_json(bad);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "model.head.weight");
    }
}

TEST(Checkpoint, Base64KnownVectors) {
    auto enc = [](std::string s) {
        return base64::encode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
    const auto d = base64::decode("Zm9vYg==");
    EXPECT_EQ(std::string(d.begin(), d.end()), "foob");
    EXPECT_THROW(base64::decode("Zm9"), ConfigError);
}
