"""
Analysis routes.
Provides API endpoints for the palm controller law and the dynamic versus
fixed palm comparison.
"""

import math

from flask import Blueprint, request, jsonify
import config
from errors import SingularAngleError
from palm_control import GripperState, controller_tick
from procedure import fig2_experiment


analysis_bp = Blueprint('analysis', __name__, url_prefix='/api')


def _float_arg(data, name: str, default: float) -> float:
    value = data.get(name, default)
    return float(value)


@analysis_bp.route('/palm/correction', methods=['GET', 'POST'])
def palm_correction_endpoint():
    """
    Evaluate the palm width correction for one gripper state.

    GET params or POST JSON (angles in degrees, pull frame):
        - w: palm width (mm)
        - theta_pull: pulling finger angle
        - theta_push: pushing finger angle

    Returns:
        JSON with 'l', 'l_roll', 'd_theta', 'dw' and the controller command
    """
    data = (request.json or {}) if request.method == 'POST' else request.args

    try:
        w = _float_arg(data, 'w', 100.0)
        theta_pull = math.radians(_float_arg(data, 'theta_pull', 90.0))
        theta_push = math.radians(_float_arg(data, 'theta_push', 90.0))
    except (TypeError, ValueError):
        return jsonify({'error': 'w, theta_pull and theta_push must be numbers'}), 400

    if not config.PALM_MIN_MM <= w <= config.PALM_MAX_MM:
        return jsonify({'error': f'w must lie in [{config.PALM_MIN_MM}, {config.PALM_MAX_MM}] mm'}), 400

    try:
        state = GripperState.from_angles(w, theta_pull, theta_push, pull_role='right')
    except SingularAngleError as e:
        return jsonify({'error': str(e)}), 400

    command = controller_tick(state)

    return jsonify({
        'w': w,
        'l': state.l,
        'l_roll': state.l_roll,
        'd_theta': state.d_theta,
        'dw': state.dw,
        'command': command.width,
        'saturated': command.saturated,
        'rate_limited': command.rate_limited
    })


@analysis_bp.route('/fig2', methods=['GET'])
def fig2_endpoint():
    """
    Run the single-pull cylinder comparison.

    GET params:
        - diameter: cylinder diameter (mm)
        - fixed_w: palm width for the fixed run (mm)

    Returns:
        JSON with rotations (deg), sensing arcs (mm) and percent increases
    """
    try:
        diameter = _float_arg(request.args, 'diameter', config.OBJECT_INNER_DIAMETER_MM)
        fixed_w = _float_arg(request.args, 'fixed_w', config.FIXED_PALM_WIDTH_MM)
    except (TypeError, ValueError):
        return jsonify({'error': 'diameter and fixed_w must be numbers'}), 400

    result = fig2_experiment(diameter, fixed_w, config.load_settings())
    return jsonify(result.to_dict())
