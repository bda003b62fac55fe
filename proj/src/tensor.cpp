#include "pushrel/tensor.hpp"

#include "pushrel/parallel.hpp"

#include <algorithm>

#if defined(__GLIBC__)
#include <malloc.h>
namespace {
// Large activation tensors are allocated and freed every batch; keeping them
// on the heap free list instead of mmap avoids page-fault churn.
const bool malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
  return true;
}();
}  // namespace
#endif

namespace pushrel {
namespace {

// 4-row register-blocked kernel; B is streamed row-wise so the inner loop
// vectorizes. Row-range form so the parallel split stays deterministic.
void matmul_rows(const double* A, const double* B, double* C, std::size_t row_lo,
                 std::size_t row_hi, int K, int N) {
  std::size_t i = row_lo;
  for (; i + 4 <= row_hi; i += 4) {
    const double* a0 = A + (i + 0) * K;
    const double* a1 = A + (i + 1) * K;
    const double* a2 = A + (i + 2) * K;
    const double* a3 = A + (i + 3) * K;
    double* c0 = C + (i + 0) * N;
    double* c1 = C + (i + 1) * N;
    double* c2 = C + (i + 2) * N;
    double* c3 = C + (i + 3) * N;
    for (int k = 0; k < K; ++k) {
      const double* b = B + static_cast<std::size_t>(k) * N;
      const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
      for (int j = 0; j < N; ++j) {
        const double bj = b[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < row_hi; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (int k = 0; k < K; ++k) {
      const double aik = a[k];
      const double* b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

constexpr std::size_t kParallelFlopCutoff = 2u << 20;

}  // namespace

void matmul_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols,
          "matmul_acc shape mismatch");
  const std::size_t flops = a.size() * static_cast<std::size_t>(b.cols);
  if (flops >= kParallelFlopCutoff && a.rows >= 8) {
    // Block rows in multiples of 4 so every part uses the fast path.
    std::size_t blocks = (static_cast<std::size_t>(a.rows) + 3) / 4;
    parallel_ranges(blocks, [&](std::size_t blo, std::size_t bhi) {
      std::size_t lo = blo * 4;
      std::size_t hi = std::min<std::size_t>(bhi * 4, a.rows);
      matmul_rows(a.data.data(), b.data.data(), c.data.data(), lo, hi, a.cols, b.cols);
    });
  } else {
    matmul_rows(a.data.data(), b.data.data(), c.data.data(), 0, a.rows, a.cols, b.cols);
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows, b.cols);
  matmul_acc(a, b, c);
  return c;
}

namespace {

void matmul_at_rows(const Tensor2& a, const Tensor2& b, double* c, std::size_t row_lo,
                    std::size_t row_hi) {
  // c[k, j] += sum_i a[i, k] * b[i, j]; i-major keeps both reads sequential.
  const int K = a.cols, N = b.cols;
  for (std::size_t i = row_lo; i < row_hi; ++i) {
    const double* arow = a.row(static_cast<int>(i));
    const double* brow = b.row(static_cast<int>(i));
    for (int k = 0; k < K; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;  // post-ReLU rows are often sparse
      double* crow = c + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

void matmul_at_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols,
          "matmul_at_acc shape mismatch");
  const std::size_t flops = a.size() * static_cast<std::size_t>(b.cols);
  const int workers = worker_count();
  if (flops >= kParallelFlopCutoff && a.rows >= 2 * workers && workers > 1) {
    // Row ranges accumulate into per-worker buffers, merged in fixed order.
    const std::size_t chunk = (static_cast<std::size_t>(a.rows) + workers - 1) / workers;
    std::vector<Tensor2> partials(workers);
    parallel_for(static_cast<std::size_t>(workers), [&](std::size_t w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min<std::size_t>(lo + chunk, a.rows);
      if (lo >= hi) return;
      partials[w] = Tensor2(c.rows, c.cols);
      matmul_at_rows(a, b, partials[w].data.data(), lo, hi);
    });
    for (const auto& p : partials) {
      if (p.data.empty()) continue;
      for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += p.data[i];
    }
  } else {
    matmul_at_rows(a, b, c.data.data(), 0, static_cast<std::size_t>(a.rows));
  }
}

void matmul_bt_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows,
          "matmul_bt_acc shape mismatch");
  const std::size_t flops = a.size() * static_cast<std::size_t>(b.rows);
  if (flops >= kParallelFlopCutoff / 4) {
    // Transposing b once turns this into the streaming kernel.
    Tensor2 bt(b.cols, b.rows);
    for (int i = 0; i < b.rows; ++i) {
      const double* src = b.row(i);
      for (int j = 0; j < b.cols; ++j) bt(j, i) = src[j];
    }
    matmul_acc(a, bt, c);
    return;
  }
  const int K = a.cols, N = b.rows;
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < N; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

void add_bias_rows(Tensor2& t, const Tensor2& bias) {
  require(bias.rows == 1 && bias.cols == t.cols, "bias shape mismatch");
  for (int i = 0; i < t.rows; ++i) {
    double* r = t.row(i);
    const double* b = bias.row(0);
    for (int j = 0; j < t.cols; ++j) r[j] += b[j];
  }
}

void sum_rows_acc(const Tensor2& g, Tensor2& bias_grad) {
  require(bias_grad.rows == 1 && bias_grad.cols == g.cols, "bias grad shape mismatch");
  double* out = bias_grad.row(0);
  for (int i = 0; i < g.rows; ++i) {
    const double* r = g.row(i);
    for (int j = 0; j < g.cols; ++j) out[j] += r[j];
  }
}

void relu_inplace(Tensor2& t) {
  for (double& v : t.data)
    if (v < 0.0) v = 0.0;
}

void relu_backward_inplace(const Tensor2& post, Tensor2& grad) {
  require(post.same_shape(grad), "relu backward shape mismatch");
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (post.data[i] <= 0.0) grad.data[i] = 0.0;
}

}  // namespace pushrel
