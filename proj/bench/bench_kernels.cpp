// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>

#include "gatae/features.hpp"
#include "gatae/graph.hpp"
#include "gatae/linalg.hpp"

namespace {

using namespace gatae;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

std::vector<GrayImage> random_images(std::size_t count, std::size_t side) {
  std::mt19937_64 rng(7);
  std::vector<GrayImage> images;
  for (std::size_t i = 0; i < count; ++i) {
    GrayImage img{side, side, std::vector<std::uint8_t>(side * side)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
    images.push_back(std::move(img));
  }
  return images;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::matmul(a, b));
}

void BM_CosineMatrix(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 3);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_similarity_matrix(x));
}

void BM_CosineMatrixSerial(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 3);
  for (auto _ : state) benchmark::DoNotOptimize(serial::cosine_similarity_matrix(x));
}

void BM_KnnGraph(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 4);
  for (auto _ : state) benchmark::DoNotOptimize(build_knn_graph(x, 10));
}

void BM_KnnGraphSerial(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 512, 4);
  for (auto _ : state) benchmark::DoNotOptimize(serial::build_knn_graph(x, 10));
}

void BM_HogBatch(benchmark::State& state) {
  const auto images = random_images(static_cast<std::size_t>(state.range(0)), 128);
  for (auto _ : state) benchmark::DoNotOptimize(hog_extract_batch(images, HogConfig{}, 128, 128));
}

void BM_HogBatchSerial(benchmark::State& state) {
  const auto images = random_images(static_cast<std::size_t>(state.range(0)), 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::hog_extract_batch(images, HogConfig{}, 128, 128));
  }
}

BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);
BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_CosineMatrix)->Arg(160)->Arg(640);
BENCHMARK(BM_CosineMatrixSerial)->Arg(160)->Arg(640);
BENCHMARK(BM_KnnGraph)->Arg(160)->Arg(640);
BENCHMARK(BM_KnnGraphSerial)->Arg(160)->Arg(640);
BENCHMARK(BM_HogBatch)->Arg(16)->Arg(64);
BENCHMARK(BM_HogBatchSerial)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
