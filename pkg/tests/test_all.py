import test_utils
import test_tensor_geometry
import test_conformal
import test_analytic
import test_kernels
import test_mesh
import test_peaceman
import test_fvm
import test_scenario
import test_export
import test_experiments
import test_cli

if __name__ == "__main__":
    test_utils.run()
    test_tensor_geometry.run()
    test_conformal.run()
    test_analytic.run()
    test_kernels.run()
    test_mesh.run()
    test_peaceman.run()
    test_fvm.run()
    test_scenario.run()
    test_export.run()
    test_experiments.run()
    test_cli.run()
