import os

import jax
import jax.numpy as jnp
import numpy as np

# Curvature needs jets exact to rounding; float32 is not enough.
jax.config.update("jax_enable_x64", True)

COMPUTE_DTYPE = jnp.float64


def setup(config):
    """Applies the `jax` block of a run config (platform, jit, cpu count)."""
    if config.logical_cpus:
        count = config.logical_cpus
        os.environ["XLA_FLAGS"] = f"--xla_force_host_platform_device_count={count}"
    if config.platform and jax.config.values.get("jax_platform_name") != config.platform:
        jax.config.update("jax_platform_name", config.platform)
    jax.config.update("jax_disable_jit", not config.jit)
    jax.config.update("jax_enable_x64", True)


def second_order_jet(fn):
    """Returns a function x -> (value, gradient, hessian) for a scalar jnp
    function of a d-vector, by nesting forward-mode Jacobians. The value and
    gradient ride along as auxiliary outputs of the same trace."""

    def first(x):
        value = fn(x)
        return value, value

    def second(x):
        grad, value = jax.jacfwd(first, has_aux=True)(x)
        return grad, (value, grad)

    def jet(x):
        hess, (value, grad) = jax.jacfwd(second, has_aux=True)(x)
        return value, grad, 0.5 * (hess + hess.T)

    return jet


def batched(fn):
    """jit(vmap(fn)) over a leading batch axis, returning numpy arrays."""
    compiled = jax.jit(jax.vmap(fn))

    def call(points):
        points = jnp.asarray(points, COMPUTE_DTYPE)
        outs = compiled(points)
        return jax.tree_util.tree_map(np.asarray, outs)

    return call
