#include "ncdre/idecoder.hpp"
#include "ncdre/ops.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace ncdre {
namespace {

using T = Tensor<double>;
constexpr Index kDim = 12;

DecoderConfig small_config(Index layers = 1) {
  DecoderConfig c;
  c.layers = layers;
  c.d_model = kDim;
  c.heads_per_edge_type = 1;
  c.cross_heads = 6;
  c.ff_width = 16;
  c.dropout = 0;
  return c;
}

struct Graph {
  Document doc = testing::toy_document();
  HmgLayout layout = make_layout(doc);
  EdgeMasks E = build_masks(layout);
  Index n = layout.num_nodes();
};

TEST(SmMsa, HeadsRespectTheirMasks) {
  Graph g;
  std::mt19937_64 rng(1);
  ParameterStore<double> store;
  const auto params = AttentionParams<double>::create(store, "sm", ParamGroup::IDecoder, kDim, 6, rng);
  std::vector<Matrix<double>> cap;
  sm_msa(T(testing::random_matrix(g.n, kDim, rng)), g.E, params, 1, false, &cap);
  ASSERT_EQ(cap.size(), 6u);
  for (Index h = 0; h < 6; ++h) {
    const auto& mask = g.E[edge_type_of_head(h, 1)];
    for (Index i = 0; i < g.n; ++i) {
      for (Index j = 0; j < g.n; ++j) {
        if (!mask(i, j)) EXPECT_EQ(cap[h](i, j), 0.0);
      }
      EXPECT_NEAR(cap[h].row(i).sum(), 1.0, 1e-12);
    }
  }
}

TEST(SmMsa, SelfLoopOnlyMaskReturnsValueRows) {
  Graph g;
  for (auto& m : g.E) m = Mask::Identity(g.n, g.n);
  std::mt19937_64 rng(2);
  ParameterStore<double> store;
  const auto params = AttentionParams<double>::create(store, "sm", ParamGroup::IDecoder, kDim, 6, rng);
  const T X(testing::random_matrix(g.n, kDim, rng));
  std::vector<Matrix<double>> cap;
  const auto out = sm_msa(X, g.E, params, 1, false, &cap);
  for (const auto& a : cap) EXPECT_EQ(a, Matrix<double>::Identity(g.n, g.n));
  const auto expect = apply(params.output, apply(params.value, X));
  EXPECT_LT((out.value() - expect.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SmMsa, AllOnesMasksEqualPlainAttention) {
  Graph g;
  for (auto& m : g.E) m = Mask::Ones(g.n, g.n);
  std::mt19937_64 rng(3);
  ParameterStore<double> store;
  const auto params = AttentionParams<double>::create(store, "sm", ParamGroup::IDecoder, kDim, 6, rng);
  const T X(testing::random_matrix(g.n, kDim, rng));
  const auto masked = sm_msa(X, g.E, params, 1).value();
  const auto plain = sm_msa(X, Graph().E, params, 1, true).value();
  EXPECT_LT((masked - plain).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SmMsa, EditingOneMaskOnlyMovesItsHead) {
  Graph g;
  std::mt19937_64 rng(4);
  ParameterStore<double> store;
  const auto params = AttentionParams<double>::create(store, "sm", ParamGroup::IDecoder, kDim, 12, rng);
  const T X(testing::random_matrix(g.n, kDim, rng));
  std::vector<Matrix<double>> before, after;
  sm_msa(X, g.E, params, 2, false, &before);
  auto E = g.E;
  E[kInterEntity] = Mask::Identity(g.n, g.n);
  sm_msa(X, E, params, 2, false, &after);
  for (Index h = 0; h < 12; ++h) {
    if (edge_type_of_head(h, 2) == kInterEntity) {
      EXPECT_NE(before[h], after[h]);
    } else {
      EXPECT_EQ(before[h], after[h]) << "head " << h;
    }
  }
}

TEST(CMsa, SingleTokenMemoryGivesItsValue) {
  std::mt19937_64 rng(5);
  ParameterStore<double> store;
  const auto params = AttentionParams<double>::create(store, "c", ParamGroup::IDecoder, kDim, 6, rng);
  const T nodes(testing::random_matrix(4, kDim, rng));
  const T H(testing::random_matrix(1, kDim, rng));
  const auto out = c_msa(nodes, H, params).value();
  const auto v = apply(params.output, apply(params.value, H)).value();
  for (Index i = 0; i < 4; ++i) EXPECT_LT((out.row(i) - v.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CMsa, RowsSumToOneAndConstructedKeyWins) {
  std::mt19937_64 rng(6);
  ParameterStore<double> store;
  auto params = AttentionParams<double>::create(store, "c", ParamGroup::IDecoder, kDim, 1, rng);
  params.query.weight.mutable_value().setIdentity();
  params.key.weight.mutable_value().setIdentity();
  const Matrix<double> nodes = testing::random_matrix(3, kDim, rng);
  Matrix<double> H = testing::random_matrix(5, kDim, rng, 0.1);
  H.row(2) = 3.0 * nodes.row(0);
  std::vector<Matrix<double>> cap;
  c_msa(T(nodes), T(H), params, &cap);
  ASSERT_EQ(cap.size(), 1u);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(cap[0].row(i).sum(), 1.0, 1e-12);
  EXPECT_GT(cap[0](0, 2), 1.0 / 5);
  EXPECT_EQ(cap[0].row(0).maxCoeff(), cap[0](0, 2));
}

struct Stack {
  Graph g;
  DecoderConfig config;
  ParameterStore<double> store;
  std::vector<DecoderLayerParams<double>> layers;
  std::mt19937_64 rng{7};
  Matrix<double> X, H;

  explicit Stack(Index n_layers) : config(small_config(n_layers)) {
    for (Index l = 0; l < n_layers; ++l) {
      layers.push_back(DecoderLayerParams<double>::create(store, "l" + std::to_string(l), config, rng));
    }
    X = testing::random_matrix(g.n, kDim, rng);
    H = testing::random_matrix(9, kDim, rng);
  }
};

TEST(DecoderLayer, ZeroWeightsLeaveNormalizedResidual) {
  Stack s(1);
  for (const auto& e : s.store.entries()) {
    if (e.name.find("norm") == std::string::npos) e.tensor.node()->value.setZero();
  }
  const auto out = decoder_layer(T(s.X), s.g.E, T(s.H), s.layers[0], s.config).value();
  const auto& n = s.layers[0].sm_norm;
  const auto ln = [&](const T& x) { return layer_norm_rows(x, n.gain, n.bias); };
  const auto expect = ln(ln(ln(T(s.X)))).value();
  EXPECT_LT((out - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DecoderLayer, DisabledCrossAttentionIgnoresH) {
  Stack s(1);
  s.config.disable_c_msa = true;
  const auto a = decoder_layer(T(s.X), s.g.E, T(s.H), s.layers[0], s.config).value();
  const auto b = decoder_layer(T(s.X), s.g.E, T(Matrix<double>(s.H * 2.0 + Matrix<double>::Ones(9, kDim))),
                               s.layers[0], s.config).value();
  EXPECT_EQ(a, b);
}

TEST(DecoderLayer, GradientMatchesFiniteDifferences) {
  Stack s(1);
  auto X = T::parameter(s.X);
  auto H = T::parameter(s.H);
  const Matrix<double> w = testing::random_matrix(s.g.n, kDim, s.rng);
  const auto loss = [&] { return sum(mul(decoder_layer(X, s.g.E, H, s.layers[0], s.config), T(w))); };
  EXPECT_LT(testing::gradient_error(X, loss), 1e-4);
  EXPECT_LT(testing::gradient_error(H, loss), 1e-4);
  for (const auto& e : s.store.entries()) {
    const double err = testing::gradient_error(e.tensor, loss);
    if (e.name.ends_with("key.bias")) {
      // Softmax ignores a shift shared by every key, so this gradient is zero.
      EXPECT_LT(e.tensor.grad().cwiseAbs().maxCoeff(), 1e-10) << e.name;
    } else {
      EXPECT_LT(err, 1e-4) << e.name;
    }
  }
}

TEST(Decoder, StackEqualsManualComposition) {
  Stack s(2);
  const T X(s.X), H(s.H);
  const auto stacked = run_decoder(X, s.g.E, H, s.layers, s.config).value();
  const auto manual =
      decoder_layer(decoder_layer(X, s.g.E, H, s.layers[0], s.config), s.g.E, H, s.layers[1], s.config).value();
  EXPECT_EQ(stacked, manual);
  EXPECT_EQ(stacked.rows(), s.g.n);
  EXPECT_EQ(stacked.cols(), kDim);
}

TEST(Decoder, BypassAndEmptyStack) {
  Stack s(1);
  DecoderConfig none = s.config;
  none.layers = 0;
  EXPECT_THROW(none.validate(), ModelConfigError);
  none.bypass_decoder = true;
  EXPECT_NO_THROW(none.validate());
  EXPECT_EQ(run_decoder(T(s.X), s.g.E, T(s.H), {}, none).value(), s.X);
  s.config.bypass_decoder = true;
  EXPECT_EQ(run_decoder(T(s.X), s.g.E, T(s.H), s.layers, s.config).value(), s.X);
}

TEST(Decoder, ClueTokensReachNodesOnlyThroughCrossAttention) {
  Stack s(2);
  for (bool disabled : {false, true}) {
    s.config.disable_c_msa = disabled;
    auto H = T::parameter(s.H);
    Tape<double> tape;
    tape.backward(sum(run_decoder(T(s.X), s.g.E, H, s.layers, s.config)));
    const double g = H.grad().cwiseAbs().sum();
    if (disabled) {
      EXPECT_EQ(g, 0.0);
    } else {
      EXPECT_GT(H.grad().row(4).cwiseAbs().sum(), 0.0);
    }
  }
}

}  // namespace
}  // namespace ncdre
