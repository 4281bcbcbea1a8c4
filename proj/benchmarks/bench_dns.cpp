#include <benchmark/benchmark.h>

#include "enor/dataset.hpp"
#include "enor/dns.hpp"
#include "enor/microstructure.hpp"

using namespace enor;

namespace {

void BM_DnsBilayer(benchmark::State& state) {
    const double length = static_cast<double>(state.range(0));
    const MaterialSpec mat;
    const Microstructure bar = build_microstructure(length, mat.layer, 0.0, 1, mat.materials);
    const auto sc = LoadingScenario::oscillating_source(6.0, mat.layer, length);
    DnsOptions o;
    o.final_time = 2.0;
    for (auto _ : state) benchmark::DoNotOptimize(dns_solve(bar, sc, o));
}
BENCHMARK(BM_DnsBilayer)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_DnsPacket(benchmark::State& state) {
    const Microstructure bar = homogeneous_bar(40.0, 1.0, 1.0, 0.2);
    const auto sc = LoadingScenario::wave_packet(2.0, 40.0);
    DnsOptions o;
    o.final_time = 20.0;
    for (auto _ : state) benchmark::DoNotOptimize(dns_solve(bar, sc, o));
}
BENCHMARK(BM_DnsPacket)->Unit(benchmark::kMillisecond);

}  // namespace
