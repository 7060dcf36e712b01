#include <mfedch/cli.hpp>

int main(int argc, char** argv)
{
    return mfedch::cli::run(argc, argv, {std::cout, std::cerr});
}
