#include <doctest.h>

#include <cmath>

#include "rs2g/params.hpp"
#include "rs2g/tensor.hpp"
#include "test_support.hpp"

using namespace rs2g;
using rs2g::testing::grad_check;
using rs2g::testing::rand_tensor;

TEST_CASE("matmul against identity") {
  const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor out = matmul(a, Tensor::identity(2));
  CHECK(out.data() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("softmax of a constant vector is uniform") {
  const Tensor out = softmax(Tensor::row({0, 0, 0}), 1);
  for (int j = 0; j < 3; ++j) CHECK(out.at(0, j) == doctest::Approx(1.0 / 3));
}

TEST_CASE("sigmoid at zero") {
  CHECK(sigmoid(Tensor::scalar(0.0)).scalar_value() == 0.5);
}

TEST_CASE("shape mismatch errors name both shapes") {
  const Tensor a = Tensor::matrix(2, 3, std::vector<double>(6, 1.0));
  const Tensor b = Tensor::matrix(4, 2, std::vector<double>(8, 1.0));
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape mismatch [2,3] vs [4,2]",
                       std::invalid_argument);
}

TEST_CASE("non-finite values rejected at construction") {
  CHECK_THROWS_AS(Tensor::scalar(std::nan("")), std::runtime_error);
  CHECK_THROWS_AS(Tensor::row({1.0, INFINITY}), std::runtime_error);
}

TEST_CASE("backward of a linear sum is all ones") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({2.0, -1.0, 0.5}));
  Tape tape;
  params.attach_all(tape);
  tape.backward(sum(w));
  CHECK(params.collect_gradients().at("w") == std::vector<double>{1, 1, 1});
  params.detach_all();
}

TEST_CASE("backward of sum(w*w)") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({1.0, 2.0, 3.0}));
  Tape tape;
  params.attach_all(tape);
  tape.backward(sum(mul(w, w)));
  CHECK(params.collect_gradients().at("w") == std::vector<double>{2, 4, 6});
  params.detach_all();
}

TEST_CASE("backward requires a scalar loss") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({1.0, 2.0}));
  Tape tape;
  params.attach_all(tape);
  Tensor doubled = mul_scalar(w, 2.0);
  CHECK_THROWS_AS(tape.backward(doubled), std::invalid_argument);
  params.detach_all();
}

TEST_CASE("backward twice on one tape errors") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({1.0, 2.0}));
  Tape tape;
  params.attach_all(tape);
  Tensor loss = sum(w);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::runtime_error);
  params.detach_all();
}

TEST_CASE("parameters unreachable from the loss get zero gradients") {
  ParameterSet params;
  Tensor used = params.add("used", Tensor::row({1.0, 2.0}));
  params.add("unused", Tensor::row({3.0, 4.0}));
  Tape tape;
  params.attach_all(tape);
  tape.backward(sum(used));
  CHECK(params.collect_gradients().at("unused") ==
        std::vector<double>{0.0, 0.0});
  params.detach_all();
}

TEST_CASE("gradients flow when only one operand is trainable") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Tensor c = Tensor::matrix(2, 2, {5, 6, 7, 8});
  Tape tape;
  params.attach_all(tape);
  tape.backward(sum(matmul(c, w)));
  const auto g = params.collect_gradients().at("w");
  // d/dW sum(C*W) = column sums of C broadcast per output column.
  CHECK(g == std::vector<double>{12, 12, 14, 14});
  params.detach_all();
}

TEST_CASE("finite differences agree for every op in the vocabulary") {
  Rng rng(2024);
  auto check = [&](const char* name, auto&& build, std::vector<Shape> shapes) {
    ParameterSet params;
    std::vector<Tensor> inputs;
    int i = 0;
    for (const auto& shape : shapes) {
      inputs.push_back(params.add(name + std::to_string(i++),
                                  rand_tensor(shape, rng, -1.2, 1.2)));
    }
    const Tensor weights = rand_tensor(
        {1}, rng);  // placeholder; per-op below builds its own mixer
    (void)weights;
    auto loss_fn = [&]() { return build(inputs); };
    const auto result = grad_check(params, loss_fn);
    INFO(name << ": worst " << result.worst);
    CHECK(result.ok);
  };

  Rng mix_rng(77);
  const Tensor mix23 = rand_tensor({2, 3}, mix_rng);
  const Tensor mix24 = rand_tensor({2, 4}, mix_rng);
  const Tensor mix43 = rand_tensor({4, 3}, mix_rng);
  const Tensor mix32 = rand_tensor({3, 2}, mix_rng);
  const Tensor mix21 = rand_tensor({2, 1}, mix_rng);
  const Tensor mix33 = rand_tensor({3, 3}, mix_rng);
  const Tensor mix13 = rand_tensor({1, 3}, mix_rng);

  check("matmul", [&](auto& in) {
    return sum(mul(matmul(in[0], in[1]), mix23));
  }, {{2, 4}, {4, 3}});
  check("add", [&](auto& in) {
    return sum(mul(add(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 3}});
  check("add_bcast_row", [&](auto& in) {
    return sum(mul(add(in[0], in[1]), mix23));
  }, {{2, 3}, {1, 3}});
  check("add_bcast_col", [&](auto& in) {
    return sum(mul(add(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 1}});
  check("sub", [&](auto& in) {
    return sum(mul(sub(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 3}});
  check("mul", [&](auto& in) {
    return sum(mul(mul(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 3}});
  check("mul_bcast_col", [&](auto& in) {
    return sum(mul(mul(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 1}});
  check("div", [&](auto& in) {
    return sum(mul(div(in[0], add_scalar(sigmoid(in[1]), 0.5)), mix23));
  }, {{2, 3}, {2, 3}});
  check("div_bcast_col", [&](auto& in) {
    return sum(mul(div(in[0], add_scalar(sigmoid(in[1]), 0.5)), mix23));
  }, {{2, 3}, {2, 1}});
  check("maximum", [&](auto& in) {
    return sum(mul(maximum(in[0], in[1]), mix23));
  }, {{2, 3}, {2, 3}});
  check("scalar_ops", [&](auto& in) {
    return sum(mul(div_scalar(mul_scalar(add_scalar(in[0], 0.3), 1.7), 2.3),
                   mix23));
  }, {{2, 3}});
  check("clamp_min", [&](auto& in) {
    return sum(mul(clamp_min(in[0], 0.25), mix23));
  }, {{2, 3}});
  check("transpose", [&](auto& in) {
    return sum(mul(transpose(in[0]), mix32));
  }, {{2, 3}});
  check("concat_axis0", [&](auto& in) {
    return sum(mul(concat({in[0], in[1]}, 0), mix43));
  }, {{2, 3}, {2, 3}});
  check("concat_axis1", [&](auto& in) {
    return sum(mul(concat({in[0], in[1]}, 1), mix24));
  }, {{2, 2}, {2, 2}});
  check("sigmoid", [&](auto& in) {
    return sum(mul(sigmoid(in[0]), mix23));
  }, {{2, 3}});
  check("tanh", [&](auto& in) {
    return sum(mul(tanh_op(in[0]), mix23));
  }, {{2, 3}});
  check("relu", [&](auto& in) {
    return sum(mul(relu(in[0]), mix23));
  }, {{2, 3}});
  check("softmax_rows", [&](auto& in) {
    return sum(mul(softmax(in[0], 1), mix23));
  }, {{2, 3}});
  check("softmax_cols", [&](auto& in) {
    return sum(mul(softmax(in[0], 0), mix23));
  }, {{2, 3}});
  check("sum_all", [&](auto& in) { return sum(in[0]); }, {{2, 3}});
  check("sum_axis0", [&](auto& in) {
    return sum(mul(sum(in[0], 0), mix13));
  }, {{2, 3}});
  check("sum_axis1", [&](auto& in) {
    return sum(mul(sum(in[0], 1), mix21));
  }, {{2, 3}});
  check("mean_all", [&](auto& in) { return mean(in[0]); }, {{2, 3}});
  check("mean_axis", [&](auto& in) {
    return sum(mul(mean(in[0], 0), mix13));
  }, {{2, 3}});
  check("max_all", [&](auto& in) { return reduce_max(in[0]); }, {{2, 3}});
  check("max_axis0", [&](auto& in) {
    return sum(mul(reduce_max(in[0], 0), mix13));
  }, {{2, 3}});
  check("gather_rows", [&](auto& in) {
    return sum(mul(gather_rows(in[0], {2, 0, 1, 2}), mix43));
  }, {{3, 3}});
  check("submatrix", [&](auto& in) {
    return sum(mul(submatrix(in[0], {0, 2}, {1, 2, 3}), mix23));
  }, {{3, 4}});
  check("pairwise_to_square", [&](auto& in) {
    return sum(mul(pairwise_to_square(in[0], 3), mix33));
  }, {{6, 1}});
  check("softmax_cross_entropy", [&](auto& in) {
    return softmax_cross_entropy(in[0], 1);
  }, {{1, 4}});
}

TEST_CASE("ops are deterministic") {
  Rng rng1(99), rng2(99);
  const Tensor a1 = rand_tensor({4, 4}, rng1);
  const Tensor a2 = rand_tensor({4, 4}, rng2);
  CHECK(a1.data() == a2.data());
  const Tensor r1 = softmax(matmul(a1, sigmoid(a1)), 1);
  const Tensor r2 = softmax(matmul(a2, sigmoid(a2)), 1);
  CHECK(r1.data() == r2.data());
}

TEST_CASE("optimizer single step") {
  ParameterSet params;
  params.add("w", Tensor::row({1.0}));
  Optimizer opt(OptimizerOptions{.lr = 0.1});
  opt.step(params, {{"w", {0.5}}});
  CHECK(params.get("w").at(0) == doctest::Approx(0.95));
}

TEST_CASE("optimizer with lr=0 leaves parameters unchanged") {
  ParameterSet params;
  params.add("w", Tensor::row({1.0, -2.0}));
  Optimizer opt(OptimizerOptions{.lr = 0.0});
  opt.step(params, {{"w", {0.5, 3.0}}});
  CHECK(params.get("w").data() == std::vector<double>{1.0, -2.0});
}

TEST_CASE("two gradient-descent steps on w^2") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({1.0}));
  Optimizer opt(OptimizerOptions{.lr = 0.1});
  for (double expected : {0.8, 0.64}) {
    Tape tape;
    params.attach_all(tape);
    tape.backward(sum(mul(w, w)));
    const Gradients grads = params.collect_gradients();
    params.detach_all();
    opt.step(params, grads);
    CHECK(w.at(0) == doctest::Approx(expected));
  }
}

TEST_CASE("gradient clipping rescales to the norm bound") {
  ParameterSet params;
  params.add("w", Tensor::row({0.0, 0.0}));
  Optimizer opt(OptimizerOptions{.lr = 1.0, .clip_norm = 5.0});
  opt.step(params, {{"w", {30.0, 40.0}}});  // norm 50 -> scaled to 5
  CHECK(params.get("w").at(0) == doctest::Approx(-3.0));
  CHECK(params.get("w").at(1) == doctest::Approx(-4.0));
}

TEST_CASE("optimizer rejects non-finite gradients by name") {
  ParameterSet params;
  params.add("w", Tensor::row({1.0}));
  Optimizer opt;
  CHECK_THROWS_WITH_AS(opt.step(params, {{"w", {std::nan("")}}}),
                       "optimizer: non-finite gradient in 'w'",
                       std::runtime_error);
}

TEST_CASE("adaptive optimizer moves parameters and stays finite") {
  ParameterSet params;
  Tensor w = params.add("w", Tensor::row({1.0, 2.0}));
  Optimizer opt(OptimizerOptions{.lr = 0.01, .adaptive = true});
  for (int i = 0; i < 3; ++i) {
    Tape tape;
    params.attach_all(tape);
    tape.backward(sum(mul(w, w)));
    const Gradients grads = params.collect_gradients();
    params.detach_all();
    opt.step(params, grads);
  }
  CHECK(w.at(0) < 1.0);
  CHECK(w.at(1) < 2.0);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  Rng rng(4242);
  ParameterSet params;
  params.add("layer.w", rand_tensor({3, 5}, rng, -2.0, 2.0));
  params.add("layer.b", rand_tensor({1, 5}, rng, -0.1, 0.1));
  params.add("odd", Tensor::row({1.0 / 3.0, 0.1, 1e-17, -123456.789012345678}));
  const std::string path = "checkpoint_roundtrip_test.json";
  params.save_json(path);
  const ParameterSet loaded = ParameterSet::load_json(path);
  CHECK(loaded.size() == params.size());
  for (const auto& [name, t] : params) {
    CHECK(loaded.get(name).shape() == t.shape());
    CHECK(loaded.get(name).data() == t.data());
  }
  std::remove(path.c_str());
}

TEST_CASE("duplicate parameter names are rejected") {
  ParameterSet params;
  params.add("w", Tensor::row({1.0}));
  CHECK_THROWS_AS(params.add("w", Tensor::row({2.0})),
                  std::invalid_argument);
}
