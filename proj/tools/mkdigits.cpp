// Writes procedurally rendered digit datasets in the MNIST IDX container
// format, for environments where the original files are not on disk.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dtd/digits.hpp"

int main(int argc, char** argv) {
    CLI::App app{"generate IDX digit datasets"};
    std::string out = ".";
    std::size_t n_train = 10000, n_test = 2000;
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output directory");
    app.add_option("--train", n_train, "training sample count");
    app.add_option("--test", n_test, "test sample count");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out);
        dtd::write_digit_idx(out + "/train-images-idx3-ubyte", out + "/train-labels-idx1-ubyte",
                             n_train, seed);
        dtd::write_digit_idx(out + "/test-images-idx3-ubyte", out + "/test-labels-idx1-ubyte",
                             n_test, seed ^ 0x5851f42d4c957f2dull);
        std::cout << "wrote " << n_train << " train and " << n_test << " test samples to "
                  << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
