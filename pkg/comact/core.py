# coding: utf-8
"""
Definition of the component interfaces shared by all configurable comact objects.
"""

from comact import __version__
from parameters import ParameterSet
import comact


logger = comact.getComactLogger()


class ConfigurationError(ValueError):
    """
    Raised when a configuration is invalid or inconsistent (wrong types, unknown regime,
    a cooperative regime with a single modality, ...).
    """
    pass


class ParametrizedObject(object):
    """
    Base class for all comact objects using the ParameterSet parametrization. See `getting_started`_ for more details.

    Parameters
    ----------
    parameters : dict
               Dictionary of the parameter names and their values that has to match the required_parameters variable.
    """
    required_parameters = ParameterSet({})
    version = __version__

    def check_parameters(self, parameters):
        """
        Checks whether all required (and no other) parameters have been specified and all their values have matching types.
        This function gets automatically executed during initialization of each :class:`.ParametrizedObject` object.

        `None` is accepted for any declared type and stands for 'not set'. Integers are accepted for floats.

        Parameters
        ----------
        parameters : dict
                   Dictionary of the parameter names and their values that has to match the required_parameters variable.
        """

        def walk(tP, P, section=None):
            if set(tP.keys()) != set(P.keys()):
                raise KeyError("Invalid parameters for %s.%s Required: %s. Supplied: %s. Difference: %s" % (self.__class__.__name__, section or '', sorted(tP.keys()), sorted(P.keys()), set(tP.keys()) ^ set(P.keys())))
            for k, v in tP.items():
                if P[k] is None:
                    continue
                if isinstance(v, ParameterSet):
                    if not isinstance(P[k], ParameterSet):
                        raise ConfigurationError("Type mismatch for parameter %s: %s != ParameterSet, for %s " % (k, type(P[k]), P[k]))
                    walk(v, P[k], section=k)
                elif v == float:
                    if isinstance(P[k], bool) or not isinstance(P[k], (int, float)):
                        raise ConfigurationError("Type mismatch for parameter %s: %s != %s " % (k, v, P[k]))
                elif v == int:
                    if isinstance(P[k], bool) or not (isinstance(P[k], int) or (isinstance(P[k], float) and P[k].is_integer())):
                        raise ConfigurationError("Type mismatch for parameter %s: %s != %s " % (k, v, P[k]))
                elif v == list:
                    if not isinstance(P[k], (list, tuple)):
                        raise ConfigurationError("Type mismatch for parameter %s: %s != %s " % (k, v, P[k]))
                elif not isinstance(P[k], v):
                    raise ConfigurationError("Type mismatch for parameter %s: %s != %s " % (k, v, P[k]))

        # we first need to collect the required parameters from all the classes along the parent path
        new_param_dict = {}
        for cls in reversed(self.__class__.__mro__):
            # some parents might not define required_parameters
            if 'required_parameters' in cls.__dict__:
                new_param_dict.update(cls.required_parameters.as_dict())
        try:
            walk(ParameterSet(new_param_dict), parameters)
        except ConfigurationError as err:
            raise ConfigurationError("%s\nInvalid parameters.\nNeed %s\nSupplied %s" % (
                                     err, ParameterSet(new_param_dict), parameters))

    def __init__(self, parameters):
        self.check_parameters(parameters)
        self.parameters = parameters

