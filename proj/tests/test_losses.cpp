#include "support/doctest_torch.hpp"

#include <cmath>

#include "sgvc/error.hpp"
#include "sgvc/losses.hpp"
#include "support/synth.hpp"

using namespace sgvc;
using namespace sgvc::testing;

namespace {

std::vector<double> values(const torch::Tensor& t) {
  const auto c = t.to(torch::kFloat64).contiguous().view(-1);
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

double naive_log_sigmoid(double x) { return std::log(1.0 / (1.0 + std::exp(-x))); }

double naive_adv(const torch::Tensor& real, const torch::Tensor& fake) {
  double r = 0, f = 0;
  const auto rv = values(real), fv = values(fake);
  for (double v : rv) r += naive_log_sigmoid(v);
  for (double v : fv) f += std::log(1.0 - 1.0 / (1.0 + std::exp(-v)));
  return r / rv.size() + f / fv.size();
}

double naive_ce(const torch::Tensor& logits, const std::vector<int64_t>& labels) {
  const auto l = logits.to(torch::kFloat64).contiguous();
  const int64_t b = l.size(0), k = l.size(1);
  double total = 0;
  for (int64_t i = 0; i < b; ++i) {
    double z = 0;
    for (int64_t j = 0; j < k; ++j) z += std::exp(l[i][j].item<double>());
    total += -std::log(std::exp(l[i][labels[i]].item<double>()) / z);
  }
  return total / b;
}

double naive_l1(const torch::Tensor& a, const torch::Tensor& b) {
  const auto av = values(a), bv = values(b);
  double s = 0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  return s / av.size();
}

// Mean over (item, frame) of the difference between column sums of |x|.
double naive_norm(const torch::Tensor& x, const torch::Tensor& g) {
  const auto xs = x.to(torch::kFloat64).contiguous(), gs = g.to(torch::kFloat64).contiguous();
  const int64_t items = xs.numel() / (xs.size(-1) * xs.size(-2));
  const int64_t rows = xs.size(-2), frames = xs.size(-1);
  const auto xv = values(xs), gv = values(gs);
  double s = 0;
  for (int64_t b = 0; b < items; ++b) {
    for (int64_t m = 0; m < frames; ++m) {
      double cx = 0, cg = 0;
      for (int64_t r = 0; r < rows; ++r) {
        cx += std::abs(xv[(b * rows + r) * frames + m]);
        cg += std::abs(gv[(b * rows + r) * frames + m]);
      }
      s += std::abs(cx - cg);
    }
  }
  return s / (items * frames);
}

torch::Tensor labels_tensor(const std::vector<int64_t>& v) { return torch::tensor(v, torch::kLong); }

}  // namespace

TEST_CASE("adversarial loss values") {
  const auto zero = torch::zeros({3});
  CHECK(adversarial_loss(zero, zero).item<double>() == doctest::Approx(2 * std::log(0.5)));
  const auto perfect = adversarial_loss(torch::full({2}, 60.0), torch::full({2}, -60.0));
  CHECK(std::abs(perfect.item<double>()) < 1e-12);
  torch::manual_seed(1);
  const auto r = torch::randn({16}, torch::kFloat64) * 2, f = torch::randn({16}, torch::kFloat64) * 2;
  CHECK(std::abs(adversarial_loss(r, f).item<double>() - naive_adv(r, f)) < 1e-6);
  CHECK(adversarial_loss(r, f).item<double>() <= 0);

  double lit = 0, ns = 0;
  for (double v : values(f)) {
    lit += std::log(1.0 - 1.0 / (1.0 + std::exp(-v)));
    ns += -naive_log_sigmoid(v);
  }
  CHECK(std::abs(generator_adversarial_loss(f).item<double>() - lit / 16) < 1e-6);
  CHECK(std::abs(generator_adversarial_loss(f, true).item<double>() - ns / 16) < 1e-6);
}

TEST_CASE("identity classification loss") {
  const auto uniform = torch::zeros({3, 4});
  const auto y = labels_tensor({0, 2, 3});
  const auto id = id_loss(uniform, uniform, uniform, uniform, y, y);
  CHECK(id.fake_id.item<double>() == doctest::Approx(std::log(4.0)));
  CHECK(id.trg_id.item<double>() == doctest::Approx(3 * std::log(4.0)));

  auto confident = torch::full({3, 4}, -50.0);
  for (int i = 0; i < 3; ++i) confident[i][y[i].item<int64_t>()] = 50.0;
  CHECK(cross_entropy(confident, y).item<double>() < 1e-12);

  torch::manual_seed(2);
  const auto fake = torch::randn({5, 4}, torch::kFloat64), src = torch::randn({5, 4}, torch::kFloat64),
             t1 = torch::randn({5, 4}, torch::kFloat64), t2 = torch::randn({5, 4}, torch::kFloat64);
  const std::vector<int64_t> ys = {0, 1, 2, 3, 1}, yt = {2, 2, 0, 1, 3};
  const auto r = id_loss(fake, src, t1, t2, labels_tensor(ys), labels_tensor(yt));
  CHECK(std::abs(r.fake_id.item<double>() - naive_ce(fake, yt)) < 1e-6);
  CHECK(std::abs(r.trg_id.item<double>() -
                 (naive_ce(src, ys) + naive_ce(t1, yt) + naive_ce(t2, yt))) < 1e-6);
  CHECK(std::abs(r.total().item<double>() - (r.fake_id + r.trg_id).item<double>()) < 1e-12);

  CHECK_THROWS_AS(cross_entropy(fake, labels_tensor({0, 1, 2, 4, 0})), LabelError);
  CHECK_THROWS_AS(cross_entropy(fake, labels_tensor({0, 1, -1, 3, 0})), LabelError);
}

TEST_CASE("L1 consistency losses") {
  torch::manual_seed(3);
  const auto a = torch::randn({2, 4, 8}, torch::kFloat64), b = torch::randn({2, 4, 8}, torch::kFloat64);
  CHECK(style_consistency_loss(a, a).item<double>() == 0.0);
  CHECK(style_consistency_loss(a, a + 0.5).item<double>() == doctest::Approx(0.5));
  CHECK(std::abs(style_consistency_loss(a, b).item<double>() - naive_l1(a, b)) < 1e-7);

  const auto c = torch::randn({2, 3, 5, 6}, torch::kFloat64), d = torch::randn({2, 3, 5, 6}, torch::kFloat64);
  CHECK(content_consistency_loss(c, c).item<double>() == 0.0);
  CHECK(content_consistency_loss(c, c + 1).item<double>() == doctest::Approx(1.0));
  CHECK(std::abs(content_consistency_loss(c, d).item<double>() - naive_l1(c, d)) < 1e-7);

  CHECK(style_diversification_loss(c, c).item<double>() == 0.0);
  CHECK(style_diversification_loss(c + 2, c).item<double>() == doctest::Approx(-2.0));
  CHECK(std::abs(style_diversification_loss(c, d).item<double>() + naive_l1(c, d)) < 1e-7);

  CHECK(reconstruction_loss(c, c).item<double>() == 0.0);
  CHECK(reconstruction_loss(c, c + 0.25).item<double>() == doctest::Approx(0.25));
  CHECK(std::abs(reconstruction_loss(c, d).item<double>() - naive_l1(c, d)) < 1e-7);
}

TEST_CASE("norm consistency loss") {
  const auto x = torch::tensor({1.0, 1.0}).view({1, 2});
  const auto g = torch::tensor({0.0, 3.0}).view({1, 2});
  CHECK(norm_consistency_loss(x, g).item<double>() == doctest::Approx(1.5));
  torch::manual_seed(4);
  const auto a = torch::randn({2, 1, 6, 9}, torch::kFloat64), b = torch::randn({2, 1, 6, 9}, torch::kFloat64);
  CHECK(norm_consistency_loss(a, a).item<double>() == 0.0);
  CHECK(std::abs(norm_consistency_loss(a, b).item<double>() - naive_norm(a, b)) < 1e-7);
  const auto perm = torch::randperm(6);
  CHECK(norm_consistency_loss(a, b).item<double>() ==
        doctest::Approx(norm_consistency_loss(a, b.index_select(2, perm)).item<double>()).epsilon(1e-12));
  CHECK_THROWS_AS(norm_consistency_loss(a, torch::randn({2, 1, 6, 8})), ShapeError);
}

TEST_CASE("L1 losses: sign, symmetry and triangle bound") {
  torch::manual_seed(5);
  const auto a = torch::randn({3, 7}, torch::kFloat64), b = torch::randn({3, 7}, torch::kFloat64),
             c = torch::randn({3, 7}, torch::kFloat64);
  using Fn = torch::Tensor (*)(const torch::Tensor&, const torch::Tensor&);
  for (Fn f : {Fn(style_consistency_loss), Fn(content_consistency_loss), Fn(reconstruction_loss),
               Fn(norm_consistency_loss)}) {
    const double ab = f(a, b).item<double>(), ba = f(b, a).item<double>();
    CHECK(ab >= 0);
    CHECK(ab == doctest::Approx(ba));
    CHECK(f(a, c).item<double>() <= ab + f(b, c).item<double>() + 1e-12);
  }
  CHECK(style_diversification_loss(a, b).item<double>() <= 0);
  CHECK(cross_entropy(a, labels_tensor({0, 3, 6})).item<double>() >= 0);
}

TEST_CASE("loss gradients match finite differences") {
  torch::manual_seed(6);
  const auto opts = torch::kFloat64;
  const auto a = torch::randn({2, 1, 4, 5}, opts), b = torch::randn({2, 1, 4, 5}, opts);
  using Fn = std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&)>;
  const std::vector<std::pair<const char*, Fn>> pairs = {
      {"style", style_consistency_loss},
      {"content", content_consistency_loss},
      {"ds", style_diversification_loss},
      {"norm", norm_consistency_loss},
      {"rec", reconstruction_loss},
      {"adv", [](auto r, auto f) { return adversarial_loss(r.view(-1), f.view(-1)); }},
      {"adv_gen", [](auto, auto f) { return generator_adversarial_loss(f.view(-1)); }},
      {"adv_gen_ns", [](auto, auto f) { return generator_adversarial_loss(f.view(-1), true); }},
  };
  for (const auto& [name, fn] : pairs) {
    auto ag = a.clone().requires_grad_(true), bg = b.clone().requires_grad_(true);
    fn(ag, bg).backward();
    const auto na = numeric_gradient([&](auto t) { return fn(t, b); }, a.clone());
    const auto nb = numeric_gradient([&](auto t) { return fn(a, t); }, b.clone());
    INFO(name);
    if (ag.grad().defined()) CHECK(gradient_error(ag.grad(), na) < 1e-4);
    if (bg.grad().defined()) CHECK(gradient_error(bg.grad(), nb) < 1e-4);
  }

  const auto logits = torch::randn({3, 4}, opts);
  const auto y = labels_tensor({1, 0, 3});
  auto lg = logits.clone().requires_grad_(true);
  cross_entropy(lg, y).backward();
  CHECK(gradient_error(lg.grad(), numeric_gradient([&](auto t) { return cross_entropy(t, y); },
                                                   logits.clone())) < 1e-4);
}

TEST_CASE("total generator objective") {
  LossWeights w;
  LossComponents ones{1, 1, 1, 1, 1, 1, 1, 1};
  // The identity weight multiplies fake_id + trg_id, which is 1 here.
  LossComponents unit{1, 0.5, 0.5, 1, 1, 1, 1, 1};
  CHECK(total_generator_objective(unit, w).total == doctest::Approx(24.5).epsilon(1e-12));
  CHECK(total_generator_objective(ones, w).total == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(total_generator_objective({}, w).total == 0.0);

  Rng rng(9);
  LossComponents c{rng.normal(), rng.uniform(), rng.uniform(), rng.uniform(),
                   rng.uniform(), -rng.uniform(), rng.uniform(), rng.uniform()};
  LossWeights rw{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
                 rng.uniform(), rng.uniform(), rng.uniform()};
  const double oracle = rw.adv * c.adv + rw.id * (c.fake_id + c.trg_id) + rw.style * c.style +
                        rw.content * c.content + rw.ds * c.ds + rw.norm * c.norm + rw.rec * c.rec;
  const auto rep = total_generator_objective(c, rw);
  CHECK(std::abs(rep.total - oracle) < 1e-9);
  CHECK(rep.ds == c.ds);
  CHECK(rep.rec == c.rec);

  // Linear in each component with its weight as coefficient.
  auto bumped = c;
  bumped.content += 0.125;
  CHECK(total_generator_objective(bumped, rw).total - rep.total ==
        doctest::Approx(0.125 * rw.content).epsilon(1e-9));

  auto bad = c;
  bad.norm = std::nan("");
  try {
    total_generator_objective(bad, rw);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("norm") != std::string::npos);
  }
  LossWeights neg;
  neg.ds = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}
