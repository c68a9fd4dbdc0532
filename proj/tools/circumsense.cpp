// Command-line entry point: calibrate | simulate | replay | report | scenario | bench.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "circumsense/app.hpp"

int main(int argc, char** argv) {
    namespace app = circumsense::app;

    CLI::App cli{"Circumferential proximity sensing for continuum robots"};
    cli.require_subcommand(1);

    app::CalibrateArgs cal;
    auto* calibrate = cli.add_subcommand("calibrate", "Fit logistic calibrations from a bench CSV");
    calibrate->add_option("csv_in", cal.csv_in, "distance_mm,unit0_v,... CSV")->required()->check(CLI::ExistingFile);
    calibrate->add_option("params_out", cal.params_out, "Calibration file to write")->required();
    calibrate->add_option("--sensitivity-floor", cal.sensitivity_floor, "Band edge slope, V/mm")
        ->capture_default_str();

    app::SimulateArgs sim;
    auto* simulate = cli.add_subcommand("simulate", "Run a scenario and score it against ground truth");
    simulate->add_option("scenario_in", sim.scenario_in)->required()->check(CLI::ExistingFile);
    simulate->add_option("trace_out", sim.trace_out)->required();
    simulate->add_option("report_out", sim.report_out)->required();
    simulate->add_option("--frames", sim.frames_out, "Also write the raw frame stream");

    app::ReplayArgs rep;
    auto* replay = cli.add_subcommand("replay", "Map a recorded frame stream");
    replay->add_option("frames_in", rep.frames_in)->required()->check(CLI::ExistingFile);
    replay->add_option("scenario_in", rep.scenario_in)->required()->check(CLI::ExistingFile);
    replay->add_option("map_out", rep.map_out)->required();

    app::ReportArgs rpt;
    auto* report = cli.add_subcommand("report", "Per-channel error table from a trace");
    report->add_option("trace_in", rpt.trace_in)->required()->check(CLI::ExistingFile);
    report->add_option("--columns", rpt.columns_out, "Per-tick error columns for plotting");

    app::ScenarioArgs scn;
    auto* scenario = cli.add_subcommand("scenario", "Write a built-in scenario and its calibration files");
    scenario->add_option("kind", scn.kind, "approach | approach-noiseless | lumen | empty")->required();
    scenario->add_option("out_dir", scn.out_dir)->required();
    scenario->add_option("--seed", scn.seed)->capture_default_str();

    app::BenchArgs bch;
    auto* bench = cli.add_subcommand("bench", "Write a synthetic bench CSV for the reference units");
    bench->add_option("csv_out", bch.csv_out)->required();
    bench->add_option("--variance", bch.variance_counts, "Reading noise, counts^2")->capture_default_str();
    bench->add_option("--seed", bch.seed)->capture_default_str();

    CLI11_PARSE(cli, argc, argv);

    try {
        if (*calibrate)
            app::calibrate(cal, std::cout);
        else if (*simulate)
            app::simulate(sim, std::cout);
        else if (*replay)
            app::replay(rep, std::cout);
        else if (*report)
            app::report(rpt, std::cout);
        else if (*scenario)
            app::write_builtin_scenario(scn, std::cout);
        else if (*bench)
            app::write_bench_csv(bch, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
