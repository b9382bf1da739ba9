#include "irsc/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <span>

#include "irsc/channel.hpp"
#include "irsc/tensor.hpp"
#include "irsc/transceiver.hpp"

namespace irsc::gradcheck {

namespace {

constexpr double kStep = 1e-4;
constexpr std::size_t kPointsPerOp = 10;

std::vector<double> random_vec(std::size_t n, rng::Stream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// Scalar loss as a deterministic function of flat input blocks. The same
// builder runs the analytic backward and the finite-difference probes.
struct Instance {
  std::vector<std::vector<double>> inputs;
  // loss value; when grads != nullptr also fills per-block analytic grads.
  std::function<double(std::span<const std::vector<double>>,
                       std::vector<std::vector<double>>*)>
      loss;
};

double check_instance(const Instance& inst) {
  std::vector<std::vector<double>> grads;
  inst.loss(inst.inputs, &grads);
  double max_rel = 0.0;
  std::vector<std::vector<double>> probe = inst.inputs;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    for (std::size_t i = 0; i < probe[b].size(); ++i) {
      const double saved = probe[b][i];
      probe[b][i] = saved + kStep;
      const double up = inst.loss(probe, nullptr);
      probe[b][i] = saved - kStep;
      const double down = inst.loss(probe, nullptr);
      probe[b][i] = saved;
      const double fd = (up - down) / (2.0 * kStep);
      const double a = grads[b][i];
      const double rel =
          std::abs(a - fd) / std::max({1e-3, std::abs(fd), std::abs(a)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// Wraps a tape program: inputs become leaves, `build` returns the output
// tensor, and the loss is the MSE against a fixed random target (so every
// output element carries its own weight in the gradient).
Instance tape_instance(std::vector<diff::Shape> shapes, rng::Stream& rng,
                       std::function<diff::Tensor(
                           diff::Tape&, std::span<const diff::Tensor>)>
                           build) {
  Instance inst;
  for (const diff::Shape& s : shapes) {
    inst.inputs.push_back(random_vec(diff::element_count(s), rng));
  }
  // The target is created lazily on the first run so its size matches the
  // output, then reused for every probe.
  auto target = std::make_shared<std::vector<double>>();
  auto target_seed = rng.next_u64();
  inst.loss = [shapes, build, target, target_seed](
                  std::span<const std::vector<double>> inputs,
                  std::vector<std::vector<double>>* grads) {
    diff::Tape tape;
    std::vector<diff::Tensor> leaves;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      leaves.push_back(tape.leaf(shapes[i], inputs[i]));
    }
    diff::Tensor out = build(tape, leaves);
    if (target->empty()) {
      rng::Stream trng(target_seed);
      *target = random_vec(out.size(), trng);
    }
    diff::Tensor target_leaf = tape.leaf(diff::Shape(out.shape()), *target);
    diff::Tensor loss = diff::mse_loss(out, target_leaf);
    const double value = loss.scalar();
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const diff::Tensor& leaf : leaves) {
        grads->emplace_back(leaf.grad().begin(), leaf.grad().end());
      }
    }
    return value;
  };
  return inst;
}

struct OpCase {
  std::string name;
  std::function<Instance(rng::Stream&)> make;
};

std::vector<OpCase> op_cases() {
  using diff::Tensor;
  using diff::Tape;
  std::vector<OpCase> cases;

  cases.push_back({"matmul", [](rng::Stream& rng) {
    return tape_instance({{4, 3}, {3, 5}}, rng,
                         [](Tape&, std::span<const Tensor> in) {
                           return diff::matmul(in[0], in[1]);
                         });
  }});
  cases.push_back({"affine", [](rng::Stream& rng) {
    return tape_instance({{4, 3}, {3, 5}, {5}}, rng,
                         [](Tape&, std::span<const Tensor> in) {
                           return diff::affine(in[0], in[1], in[2]);
                         });
  }});
  cases.push_back({"activation/relu", [](rng::Stream& rng) {
    return tape_instance({{3, 7}}, rng, [](Tape&, std::span<const Tensor> in) {
      return diff::relu(in[0]);
    });
  }});
  cases.push_back({"activation/tanh", [](rng::Stream& rng) {
    return tape_instance({{3, 7}}, rng, [](Tape&, std::span<const Tensor> in) {
      return diff::tanh_act(in[0]);
    });
  }});
  cases.push_back({"concat_rows", [](rng::Stream& rng) {
    return tape_instance({{3, 4}, {3, 2}}, rng,
                         [](Tape&, std::span<const Tensor> in) {
                           return diff::concat_rows(in[0], in[1]);
                         });
  }});
  cases.push_back({"l2_normalize_scale", [](rng::Stream& rng) {
    return tape_instance({{3, 8}}, rng, [](Tape&, std::span<const Tensor> in) {
      return diff::l2_normalize_scale(in[0], std::sqrt(32.0));
    });
  }});
  cases.push_back({"mse_loss", [](rng::Stream& rng) {
    // mse_loss is the probe loss itself here: out == scalar mse of inputs.
    return tape_instance({{4, 6}, {4, 6}}, rng,
                         [](Tape&, std::span<const Tensor> in) {
                           return diff::mse_loss(in[0], in[1]);
                         });
  }});
  cases.push_back({"add+scale+sum", [](rng::Stream& rng) {
    return tape_instance({{5, 3}, {5, 3}}, rng,
                         [](Tape&, std::span<const Tensor> in) {
                           return diff::add(diff::scale(in[0], 0.7),
                                            diff::scale(in[1], -1.3));
                         });
  }});

  // Channel layers, noise pinned by reseeding per evaluation.
  cases.push_back({"interference_channel", [](rng::Stream& rng) {
    const std::size_t nb = 3, batch = 2;
    rng::Stream channel_rng(rng.next_u64());
    std::vector<channel::ChannelRealization> realizations;
    for (std::size_t i = 0; i < batch; ++i) {
      auto r = channel::sample_channel(2, 2, 2, channel_rng);
      r.noise_variance = 0.3;
      realizations.push_back(std::move(r));
    }
    const auto noise_seed = rng.next_u64();
    auto shared = std::make_shared<std::vector<channel::ChannelRealization>>(
        std::move(realizations));
    return tape_instance(
        {{batch, 2 * 2 * nb}, {batch, 2 * 2 * nb}}, rng,
        [shared, noise_seed, nb](Tape&, std::span<const Tensor> in) {
          rng::Stream noise(noise_seed);
          auto y = channel::apply_interference_channel(in, *shared, nb, noise);
          return diff::concat_rows(y[0], y[1]);
        });
  }});
  cases.push_back({"filtered_channel", [](rng::Stream& rng) {
    const std::size_t nb = 3, batch = 2;
    rng::Stream channel_rng(rng.next_u64());
    std::vector<channel::ChannelRealization> realizations;
    std::vector<channel::PrecoderSet> precoders;
    for (std::size_t i = 0; i < batch; ++i) {
      auto r = channel::sample_channel(2, 2, 2, channel_rng);
      r.noise_variance = 0.3;
      precoders.push_back(channel::design_precoders_filters(r, 10).precoders);
      realizations.push_back(std::move(r));
    }
    const auto noise_seed = rng.next_u64();
    auto shared_r = std::make_shared<std::vector<channel::ChannelRealization>>(
        std::move(realizations));
    auto shared_p = std::make_shared<std::vector<channel::PrecoderSet>>(
        std::move(precoders));
    return tape_instance(
        {{batch, 2 * 2 * nb}, {batch, 2 * 2 * nb}}, rng,
        [shared_r, shared_p, noise_seed, nb](Tape&,
                                             std::span<const Tensor> in) {
          rng::Stream noise(noise_seed);
          auto y = channel::apply_filtered_channel(in, *shared_r, *shared_p,
                                                   nb, noise);
          return diff::concat_rows(y[0], y[1]);
        });
  }});

  return cases;
}

}  // namespace

std::vector<CheckResult> run_gradient_suite(std::uint64_t seed) {
  std::vector<CheckResult> results;
  for (const OpCase& op : op_cases()) {
    rng::Stream rng(seed, op.name);
    CheckResult r;
    r.name = op.name;
    for (std::size_t point = 0; point < kPointsPerOp; ++point) {
      Instance inst = op.make(rng);
      r.max_rel_err = std::max(r.max_rel_err, check_instance(inst));
    }
    r.pass = r.max_rel_err < r.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    if (!r.pass) return false;
  }
  return !results.empty();
}

}  // namespace irsc::gradcheck
