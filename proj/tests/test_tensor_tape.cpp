#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "primelearn/rng.hpp"
#include "primelearn/tape.hpp"
#include "primelearn/tensor.hpp"

using namespace primelearn;
using nd::ParamRef;
using nd::Tape;
using nd::Tensor;

namespace {

template <class T>
Tensor<T> random_tensor(std::vector<std::size_t> shape, rng::Engine& eng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(scale * rng::normal01(eng));
  return t;
}

// Convenience wrapper: gradcheck a scalar-valued builder over one parameter.
template <class T, class Builder>
double check_one(Tensor<T>& theta, Builder&& build, double eps = 1e-3) {
  Tensor<T> grad = Tensor<T>::zeros(theta.shape);
  ParamRef<T> ref{&theta, &grad};
  auto run = [&](bool with_grad) -> double {
    Tape<T> tape(with_grad);
    auto loss = build(tape, tape.leaf(theta, &grad));
    const double value = static_cast<double>(tape.value(loss).data[0]);
    if (with_grad) tape.backward(loss);
    return value;
  };
  return nd::gradcheck<T>(run, std::span<const ParamRef<T>>(&ref, 1), eps, 48, 99);
}

}  // namespace

TEST_CASE("matmul against identity and a hand case") {
  Tape<double> tape(false);
  Tensor<double> a({2, 2});
  a.data = {1, 2, 3, 4};
  Tensor<double> eye({2, 2});
  eye.data = {1, 0, 0, 1};
  auto prod = tape.matmul(tape.constant(a), tape.constant(eye));
  CHECK(tape.value(prod).data == a.data);

  Tensor<double> b({2, 2});
  b.data = {5, 6, 7, 8};
  auto ab = tape.matmul(tape.constant(a), tape.constant(b));
  CHECK(tape.value(ab).data == std::vector<double>{19, 22, 43, 50});

  Tensor<double> bad({3, 2});
  CHECK_THROWS_AS(tape.matmul(tape.constant(a), tape.constant(bad)), std::invalid_argument);
}

TEST_CASE("softmax of a uniform row is uniform and rows sum to one") {
  Tape<double> tape(false);
  auto sm = tape.softmax(tape.constant(Tensor<double>::full({2, 5}, 1.25)), 1);
  for (double v : tape.value(sm).data) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.2, 1e-12));

  rng::Engine eng(1);
  auto r = tape.softmax(tape.constant(random_tensor<double>({4, 7}, eng, 3.0)), 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 7; ++j) row += tape.value(r)(i, j);
    CHECK_THAT(row, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("log of softmax stays finite for inputs within +-30") {
  Tape<float> tape(false);
  Tensor<float> x({1, 3});
  x.data = {-30.0f, 0.0f, 30.0f};
  auto sm = tape.softmax(tape.constant(x), 1);
  for (float v : tape.value(sm).data) {
    CHECK(std::isfinite(std::log(static_cast<double>(v))));
  }
}

TEST_CASE("relu backward passes gradient at x>0 and blocks it at x<0") {
  Tensor<double> x({1, 4});
  x.data = {-2.0, -0.5, 0.5, 2.0};
  Tensor<double> grad = Tensor<double>::zeros(x.shape);
  Tape<double> tape(true);
  auto loss = tape.mean(tape.relu(tape.leaf(x, &grad)));
  tape.backward(loss);
  CHECK(grad.data[0] == 0.0);
  CHECK(grad.data[1] == 0.0);
  CHECK_THAT(grad.data[2], Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK_THAT(grad.data[3], Catch::Matchers::WithinAbs(0.25, 1e-12));
}

TEST_CASE("layer_norm output has zero mean and unit variance per row") {
  rng::Engine eng(2);
  Tape<double> tape(false);
  auto x = tape.constant(random_tensor<double>({3, 16}, eng, 5.0));
  auto y = tape.layer_norm(x, tape.constant(Tensor<double>::full({16}, 1.0)),
                           tape.constant(Tensor<double>::zeros({16})));
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < 16; ++j) mean += tape.value(y)(i, j);
    mean /= 16;
    for (std::size_t j = 0; j < 16; ++j) {
      const double d = tape.value(y)(i, j) - mean;
      var += d * d;
    }
    var /= 16;
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 1e-4));
  }
}

TEST_CASE("a parameter used along two paths accumulates both gradients") {
  Tensor<double> x({1, 3});
  x.data = {1.0, 2.0, 3.0};
  Tensor<double> grad_two = Tensor<double>::zeros(x.shape);
  {
    Tape<double> tape(true);
    auto leaf = tape.leaf(x, &grad_two);
    auto loss = tape.mean(tape.add(leaf, leaf));
    tape.backward(loss);
  }
  Tensor<double> grad_one = Tensor<double>::zeros(x.shape);
  {
    Tape<double> tape(true);
    auto leaf = tape.leaf(x, &grad_one);
    auto loss = tape.mean(leaf);
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < 3; ++i)
    CHECK_THAT(grad_two.data[i], Catch::Matchers::WithinAbs(2.0 * grad_one.data[i], 1e-12));
}

TEST_CASE("embedding_lookup gathers rows and scatters gradients") {
  Tensor<double> table({4, 2});
  table.data = {1, 2, 3, 4, 5, 6, 7, 8};
  Tensor<double> grad = Tensor<double>::zeros(table.shape);
  Tape<double> tape(true);
  auto rows = tape.embedding_lookup(tape.leaf(table, &grad), {3, 0, 3});
  CHECK(tape.value(rows).data == std::vector<double>{7, 8, 1, 2, 7, 8});
  auto loss = tape.mean(rows);
  tape.backward(loss);
  // Row 3 is used twice: its gradient must be twice row 0's.
  CHECK_THAT(grad(3, 0), Catch::Matchers::WithinAbs(2.0 * grad(0, 0), 1e-12));
  CHECK(grad(1, 0) == 0.0);
  CHECK_THROWS_AS(tape.embedding_lookup(tape.constant(table), {4}), std::invalid_argument);
}

TEST_CASE("non-finite values trip a numeric error") {
  Tape<double> tape(false);
  Tensor<double> x({1, 2});
  x.data = {1e308, 1e308};
  auto node = tape.constant(x);
  CHECK_THROWS_AS(tape.add(node, node), nd::numeric_error);
}

TEST_CASE("gradcheck validates eps range and a known closed form") {
  rng::Engine eng(9);
  Tensor<double> theta = random_tensor<double>({3, 3}, eng);

  // sum of squares: the analytic gradient has the 2*theta closed form.
  auto build = [](Tape<double>& tape, Tape<double>::NodeId leaf) {
    return tape.mean(tape.matmul(leaf, tape.transpose(leaf)));
  };
  CHECK(check_one<double>(theta, build) < 1e-3);

  Tensor<double> g = Tensor<double>::zeros(theta.shape);
  ParamRef<double> ref{&theta, &g};
  auto run = [&](bool) { return 0.0; };
  CHECK_THROWS_AS(nd::gradcheck<double>(run, std::span<const ParamRef<double>>(&ref, 1), 1e-5),
                  std::invalid_argument);
}

TEST_CASE("gradcheck of a constant function reports zero gradient") {
  Tensor<double> theta = Tensor<double>::full({2, 2}, 3.0);
  auto build = [](Tape<double>& tape, Tape<double>::NodeId) {
    return tape.mean(tape.constant(Tensor<double>::full({1}, 7.0)));
  };
  CHECK(check_one<double>(theta, build) == 0.0);
}

TEST_CASE("primitive gradients match central differences") {
  rng::Engine eng(17);

  SECTION("matmul") {
    Tensor<double> theta = random_tensor<double>({4, 5}, eng);
    Tensor<double> other = random_tensor<double>({5, 3}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.matmul(leaf, tape.constant(other)));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("add and scale") {
    Tensor<double> theta = random_tensor<double>({3, 4}, eng);
    Tensor<double> other = random_tensor<double>({3, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.scale(tape.add(leaf, tape.constant(other)), 2.5));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("add_rowvec bias") {
    Tensor<double> theta = random_tensor<double>({4}, eng);
    Tensor<double> x = random_tensor<double>({3, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.add_rowvec(tape.constant(x), leaf));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("tile_rows") {
    Tensor<double> theta = random_tensor<double>({2, 3}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.gelu(tape.tile_rows(leaf, 3)));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("gelu") {
    Tensor<double> theta = random_tensor<double>({4, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.gelu(leaf));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("sigmoid") {
    Tensor<double> theta = random_tensor<double>({4, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.sigmoid(leaf));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("layer_norm input") {
    Tensor<double> theta = random_tensor<double>({3, 8}, eng);
    Tensor<double> gain = random_tensor<double>({8}, eng, 0.5);
    Tensor<double> bias = random_tensor<double>({8}, eng, 0.5);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(
          tape.gelu(tape.layer_norm(leaf, tape.constant(gain), tape.constant(bias))));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("layer_norm gain") {
    Tensor<double> theta = random_tensor<double>({8}, eng);
    Tensor<double> x = random_tensor<double>({3, 8}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(
          tape.gelu(tape.layer_norm(tape.constant(x), leaf,
                                    tape.constant(Tensor<double>::zeros({8})))));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("softmax both axes") {
    Tensor<double> theta = random_tensor<double>({4, 6}, eng);
    for (int axis : {0, 1}) {
      auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
        return tape.mean(tape.gelu(tape.softmax(leaf, axis)));
      };
      CHECK(check_one<double>(theta, build) < 1e-3);
    }
  }
  SECTION("transpose and concat") {
    Tensor<double> theta = random_tensor<double>({3, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      auto t = tape.transpose(leaf);
      auto c = tape.concat({t, t}, 1);
      auto r = tape.concat({c, c}, 0);
      return tape.mean(tape.gelu(r));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("embedding_lookup") {
    Tensor<double> theta = random_tensor<double>({5, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      return tape.mean(tape.gelu(tape.embedding_lookup(leaf, {0, 2, 2, 4})));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("windowed_attention q/k/v") {
    Tensor<double> theta = random_tensor<double>({6, 4}, eng);  // 2 windows of 3 rows
    Tensor<double> wq = random_tensor<double>({4, 4}, eng);
    Tensor<double> wk = random_tensor<double>({4, 4}, eng);
    Tensor<double> wv = random_tensor<double>({4, 4}, eng);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      auto q = tape.matmul(leaf, tape.constant(wq));
      auto k = tape.matmul(leaf, tape.constant(wk));
      auto v = tape.matmul(leaf, tape.constant(wv));
      return tape.mean(tape.gelu(tape.windowed_attention(q, k, v, 3, 2)));
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
  SECTION("wce_loss") {
    Tensor<double> theta = random_tensor<double>({8}, eng, 0.8);
    auto build = [&](Tape<double>& tape, Tape<double>::NodeId leaf) {
      auto p = tape.sigmoid(leaf);
      return tape.wce_loss(p, {1, 0, 0, 1, 0, 1, 0, 0}, 1.5, 20.0);
    };
    CHECK(check_one<double>(theta, build) < 1e-3);
  }
}

TEST_CASE("windowed attention rows are a probability distribution") {
  rng::Engine eng(23);
  Tape<double> tape(false);
  auto q = tape.constant(random_tensor<double>({10, 8}, eng));
  auto k = tape.constant(random_tensor<double>({10, 8}, eng));
  auto v = tape.constant(random_tensor<double>({10, 8}, eng));
  Tensor<double> probs;
  tape.windowed_attention(q, k, v, 5, 2, &probs);
  REQUIRE(probs.shape == std::vector<std::size_t>{2 * 2 * 5, 5});
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double row = 0;
    for (std::size_t j = 0; j < probs.cols(); ++j) row += probs(i, j);
    REQUIRE_THAT(row, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("the injected gelu backward sign flip makes gradcheck fail") {
  rng::Engine eng(31);
  Tensor<double> theta = random_tensor<double>({3, 3}, eng);
  auto build = [](Tape<double>& tape, Tape<double>::NodeId leaf) {
    return tape.mean(tape.gelu(leaf));
  };
  nd::testhooks::negate_gelu_grad() = true;
  const double err = check_one<double>(theta, build);
  nd::testhooks::negate_gelu_grad() = false;
  CHECK(err > 0.1);
}

TEST_CASE("sgd_step arithmetic") {
  Tensor<float> theta = Tensor<float>::full({1}, 1.0f);
  Tensor<float> grad = Tensor<float>::full({1}, 1.0f);
  nd::sgd_step(theta, grad, 0.01f);
  CHECK_THAT(theta.data[0], Catch::Matchers::WithinAbs(0.99, 1e-7));

  Tensor<float> zero = Tensor<float>::zeros({1});
  nd::sgd_step(theta, zero, 0.01f);
  CHECK_THAT(theta.data[0], Catch::Matchers::WithinAbs(0.99, 1e-7));

  // Single-step linearity: theta - (a+b)g equals (theta - a g) - b g.
  Tensor<double> t1 = Tensor<double>::full({1}, 1.0);
  Tensor<double> t2 = t1;
  Tensor<double> g = Tensor<double>::full({1}, 0.37);
  nd::sgd_step(t1, g, 0.01 + 0.02);
  nd::sgd_step(t2, g, 0.01);
  nd::sgd_step(t2, g, 0.02);
  CHECK_THAT(t1.data[0], Catch::Matchers::WithinAbs(t2.data[0], 1e-12));

  Tensor<double> mismatched = Tensor<double>::zeros({2});
  CHECK_THROWS_AS(nd::sgd_step(t1, mismatched, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(nd::sgd_step(t1, g, -1.0), std::invalid_argument);
}

TEST_CASE("identical inputs produce bit-identical forward values") {
  auto run = [] {
    rng::Engine eng(77);
    Tensor<float> a = random_tensor<float>({6, 6}, eng);
    Tensor<float> b = random_tensor<float>({6, 6}, eng);
    Tape<float> tape(false);
    auto out = tape.layer_norm(tape.matmul(tape.constant(a), tape.constant(b)),
                               tape.constant(Tensor<float>::full({6}, 1.0f)),
                               tape.constant(Tensor<float>::zeros({6})));
    return tape.value(out).data;
  };
  CHECK(run() == run());
}
