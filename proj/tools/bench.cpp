// Timing harness for the mini-batch kernels: per-example reference loop vs
// the blocked kernels, single- and multi-threaded.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "intent/batch.hpp"
#include "intent/rng.hpp"

using namespace intent;

namespace {

double time_call(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

std::vector<EncodedSequence> random_sequences(int n, int T, int pages, int clicks,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedSequence> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    EncodedSequence s;
    s.T = T;
    s.page_dims = pages;
    s.click_dims = clicks;
    s.y = rng.bernoulli(0.13) ? 1 : 0;
    const int valid = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
    for (int t = 0; t < valid; ++t) {
      SeqStep step;
      step.page = static_cast<int>(rng.below(static_cast<std::uint64_t>(pages)));
      if (rng.bernoulli(0.3)) {
        step.clicks.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(clicks))));
      }
      step.delta = rng.normal();
      s.steps.push_back(std::move(step));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mini-batch kernel benchmark"};
  int batch = 128, hidden = 64, T = 30, pages = 13, clicks = 8, reps = 20, eng_dim = 44;
  app.add_option("--batch", batch);
  app.add_option("--hidden", hidden);
  app.add_option("--steps", T);
  app.add_option("--reps", reps);
  CLI11_PARSE(app, argc, argv);

  int max_threads = 1;
#ifdef _OPENMP
  max_threads = omp_get_max_threads();
#endif
  std::printf("batch %d, hidden %d, T %d, %d reps, max threads %d\n\n", batch, hidden, T, reps,
              max_threads);

  const std::vector<EncodedSequence> seqs =
      random_sequences(batch, T, pages, clicks, 42);
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) idx[static_cast<std::size_t>(i)] = i;

  Rng rng(7);
  Eigen::MatrixXd Xflat(batch, eng_dim);
  Eigen::VectorXd y(batch);
  for (int r = 0; r < batch; ++r) {
    for (int c = 0; c < eng_dim; ++c) Xflat(r, c) = rng.normal();
    y[r] = rng.bernoulli(0.13) ? 1.0 : 0.0;
  }

  const nn::FfnnParams ffnn = nn::init_ffnn({eng_dim, hidden, hidden, 1}, 3);
  const seq::LstmParams lstm = seq::init_lstm(seqs.front().dim(), hidden, 3);
  const Eigen::MatrixXd no_drop;

  struct Row {
    const char* name;
    std::function<void()> fn;
  };
  const std::vector<Row> rows = {
      {"ffnn grad reference", [&] { batch::ffnn_grad_reference(ffnn, Xflat, y, idx, no_drop); }},
      {"ffnn grad blocked", [&] { batch::ffnn_grad(ffnn, Xflat, y, idx, no_drop); }},
      {"lstm grad reference", [&] { batch::lstm_grad_reference(lstm, seqs, idx, no_drop); }},
      {"lstm grad blocked", [&] { batch::lstm_grad(lstm, seqs, idx, no_drop); }},
      {"lstm scores reference", [&] { batch::lstm_scores_reference(lstm, seqs); }},
      {"lstm scores blocked", [&] { batch::lstm_scores(lstm, seqs); }},
  };

  std::printf("%-24s %12s %12s %9s\n", "kernel", "1 thread", "all threads", "speedup");
  for (const Row& row : rows) {
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    const double serial = time_call(row.fn, reps);
#ifdef _OPENMP
    omp_set_num_threads(max_threads);
#endif
    const double parallel = time_call(row.fn, reps);
    std::printf("%-24s %10.3f ms %10.3f ms %8.2fx\n", row.name, serial * 1e3, parallel * 1e3,
                serial / parallel);
  }
  return 0;
}
