#include "thermid/pipeline.hpp"

#include "thermid/error.hpp"
#include "thermid/plant.hpp"
#include "thermid/rng.hpp"

namespace thermid::pipeline {

Trace simulate_trace(const io::ExperimentConfig& config, std::uint64_t seed) {
    const plant::Schedule schedule =
        plant::random_schedule(config.duration_s, derive_seed(seed, "schedule"));
    plant::SimulationOptions sim;
    sim.output_rate_hz = config.output_rate_hz;
    sim.substeps = config.substeps;
    return plant::simulate_schedule(schedule, config.plant, derive_seed(seed, "noise"), sim);
}

Prepared prepare(const Trace& trace, double target_hz) {
    Prepared p;
    p.resampled = modelselect::resample(trace, target_hz);
    p.split = modelselect::split_dev_test(p.resampled);
    p.test_begin = p.split.dev.data.size() + p.split.gap;
    return p;
}

modelselect::EvalOptions eval_options(const io::ExperimentConfig& config) {
    modelselect::EvalOptions o;
    o.n4sid.horizon = config.horizon;
    o.warmup_s = config.warmup_s;
    return o;
}

Eigen::VectorXd predict_test(const sysid::StateSpaceModel& model, const Prepared& data,
                             double warmup_s) {
    if (model.sample_rate != data.resampled.sample_rate)
        throw DataError("model rate does not match the prepared trace rate");
    const Eigen::MatrixXd v = modelselect::feature_matrix(model.spec, data.resampled);
    return modelselect::free_run(model, v, data.test_begin, data.resampled.size(), warmup_s);
}

Trained train(const Prepared& data, const features::RegressorSpec& spec, int order,
              const modelselect::EvalOptions& options) {
    const DevTrace& dev = data.split.dev;
    Trained t;
    t.identification = modelselect::train_on(dev.data, 0, dev.data.size(), spec, order, options);
    const Eigen::VectorXd pred = predict_test(t.identification.model, data, options.warmup_s);
    const auto& temp = data.split.test.data.temp;
    t.test_mse = sysid::mse(pred, Eigen::Map<const Eigen::VectorXd>(
                                      temp.data(), static_cast<Eigen::Index>(temp.size())));
    return t;
}

} // namespace thermid::pipeline
