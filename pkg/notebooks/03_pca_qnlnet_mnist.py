"""
PCA-QNL-Net on MNIST zeros and ones
===================================

Trains the PCA head with the quantum layer on a small MNIST subset. Point
``QNLNET_DATA_DIR`` at a directory holding the four IDX files.
"""

# %%
import os

from qnlnet.harness import RunConfig, parameter_report, prepare_data, init_state, train

data_dir = os.environ.get("QNLNET_DATA_DIR", "data/mnist")
config = RunConfig(dataset="mnist", classes=(0, 1), head="pca", ansatz=0, reps_r=2, reps_D=1,
                   epochs=3, lr=1e-2, train_limit=300, test_limit=200, data_dir=data_dir)
data = prepare_data(config)
print(len(data.train), "train /", len(data.test), "test samples")

# %%
# Four principal components, standardized, feed a 4x4 linear layer and
# then the four-qubit circuit. The classical part has 22 parameters.
print(parameter_report(init_state(config, data).model))

# %%
state = train(config, data=data)
for row in state.metrics:
    print(row.epoch, round(row.mean_train_loss, 4), row.train_accuracy, row.test_accuracy)

# %%
# With r = D = 1 the readout on qubit 0 is identically zero and the model
# cannot leave chance level; at least two encoder repetitions or another
# readout qubit are needed for the circuit to carry a signal.
