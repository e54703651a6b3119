import icinfer._classifiers
import icinfer._config
import icinfer._datamodel
import icinfer._dimreduce
import icinfer._error
import icinfer._icilogit
import icinfer._icipath
import icinfer._selftrain
import icinfer._theory
import icinfer.types

types = icinfer.types

ParseError = icinfer._error.ParseError
IciError = icinfer._error.IciError
LoadError = icinfer._error.LoadError
SamplingError = icinfer._error.SamplingError
SynthError = icinfer._error.SynthError
FitError = icinfer._error.FitError
RangeError = icinfer._error.RangeError
ParameterError = icinfer._error.ParameterError
DimensionError = icinfer._error.DimensionError
ConfigError = icinfer._error.ConfigError

load_features = icinfer._datamodel.load_features
write_features = icinfer._datamodel.write_features
sample_episode = icinfer._datamodel.sample_episode
synth_gaussian = icinfer._datamodel.synth_gaussian
one_hot = icinfer._datamodel.one_hot
l2_normalize = icinfer._datamodel.l2_normalize

lle_fit_transform = icinfer._dimreduce.lle_fit_transform
pca_fit_transform = icinfer._dimreduce.pca_fit_transform
reduce_features = icinfer._dimreduce.reduce_features

annihilator = icinfer._icipath.annihilator
lambda_max = icinfer._icipath.lambda_max
solve_path = icinfer._icipath.solve_path
fit_path = icinfer._icipath.fit_path
rank_instances = icinfer._icipath.rank_instances

augment_design = icinfer._icilogit.augment_design
nll_objective = icinfer._icilogit.nll_objective
solve_logit_path = icinfer._icilogit.solve_logit_path

fit_logreg = icinfer._classifiers.fit_logreg
fit_predict_knn = icinfer._classifiers.fit_predict_knn
predict = icinfer._classifiers.predict

select_subset = icinfer._selftrain.select_subset
run_episode = icinfer._selftrain.run_episode
run_episodes = icinfer._selftrain.run_episodes
evaluate = icinfer._selftrain.evaluate

vectorize = icinfer._theory.vectorize
check_conditions = icinfer._theory.check_conditions
theorem_lambda = icinfer._theory.theorem_lambda
support_recovery_trial = icinfer._theory.support_recovery_trial
condition_frequency_study = icinfer._theory.condition_frequency_study
residual_histogram = icinfer._theory.residual_histogram

RunConfig = icinfer._config.RunConfig
loads_config = icinfer._config.loads_config
dumps_config = icinfer._config.dumps_config

__all__ = [k for k in dir() if not k.startswith('_') and k != __name__]
