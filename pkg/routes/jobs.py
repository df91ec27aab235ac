"""
Dataset job routes.
A job simulates a list of rolling runs one /step at a time and serves the
resulting feature matrix as CSV.
"""

import csv
import io
import uuid
from datetime import datetime
from typing import Dict, Any, Optional

from flask import Blueprint, request, jsonify, Response
import config
from feature_extraction import assemble, feature_names
from procedure import RunProcessor, plan_runs


# Blueprint for job-related routes
jobs_bp = Blueprint('jobs', __name__)

# In-memory job storage (single-process only)
current_job: Optional[Dict[str, Any]] = None


def create_job(
    objects: list,
    runs_per_object: int,
    seed: int,
    settings: config.Settings
) -> Dict[str, Any]:
    """Create a new job instance."""
    return {
        'job_id': str(uuid.uuid4()),
        'objects': objects,
        'runs_per_object': runs_per_object,
        'seed': seed,
        'runs': plan_runs(objects, runs_per_object, seed, settings),
        'settings': settings,
        'current_index': 0,
        'results': [],
        'features': [],
        'created_at': datetime.now().isoformat(),
        'completed': False
    }


def generate_csv(job: Dict[str, Any]) -> str:
    """
    Generate CSV content from a job's results.

    One row per run; feature columns are empty for failed runs.

    Args:
        job: Job dictionary

    Returns:
        CSV content as string
    """
    output = io.StringIO()
    writer = csv.writer(output)

    channels = job['settings'].sensor.active[1] - job['settings'].sensor.active[0]
    names = feature_names(channels, job['settings'].features.peaks_per_channel)

    # Header
    writer.writerow(['label', 'seed', 'status', 'notes'] + names)

    # Data rows
    for result, vector in zip(job['results'], job['features']):
        values = [repr(float(v)) for v in vector] if vector is not None else [''] * len(names)
        writer.writerow([
            result['label'],
            result['seed'],
            'Success' if result['success'] else 'Error',
            result.get('error') or ''
        ] + values)

    return output.getvalue()


def summarize(result: Dict[str, Any]) -> Dict[str, Any]:
    """JSON-safe view of a run result (the trace itself stays server-side)."""
    return {key: value for key, value in result.items() if key != 'trace'}


@jobs_bp.route('/')
def index():
    """Report the state of the current job."""
    if not current_job:
        return jsonify({'job': None})
    return jsonify({'job': {
        'job_id': current_job['job_id'],
        'total': len(current_job['runs']),
        'processed': current_job['current_index'],
        'completed': current_job['completed']
    }})


@jobs_bp.route('/start', methods=['POST'])
def start_job():
    """
    Initialize a new dataset job.

    Expects JSON payload with:
    - objects: list (or comma-separated string) of shapes
    - runs_per_object: runs per shape
    - seed: base seed
    """
    global current_job

    data = request.json or {}

    # Parse objects (accept both string and list)
    objects_input = data.get('objects', list(config.SHAPES))
    if isinstance(objects_input, str):
        objects = [o.strip().lower() for o in objects_input.split(',') if o.strip()]
    elif isinstance(objects_input, list):
        objects = [str(o).strip().lower() for o in objects_input if str(o).strip()]
    else:
        return jsonify({'error': 'Invalid objects format'}), 400

    if not objects:
        return jsonify({'error': 'No objects provided'}), 400
    unknown = [o for o in objects if o not in config.SHAPES]
    if unknown:
        return jsonify({'error': f"Unknown object: {unknown[0]}"}), 400

    try:
        runs_per_object = int(data.get('runs_per_object', config.RUNS_PER_OBJECT))
        seed = int(data.get('seed', config.DEFAULT_SEED))
    except (TypeError, ValueError):
        return jsonify({'error': 'runs_per_object and seed must be integers'}), 400
    if runs_per_object < 1:
        return jsonify({'error': 'runs_per_object must be at least 1'}), 400

    # Create job
    current_job = create_job(objects, runs_per_object, seed, config.load_settings())

    return jsonify({
        'job_id': current_job['job_id'],
        'total_runs': len(current_job['runs']),
        'message': 'Job created successfully'
    })


@jobs_bp.route('/step', methods=['POST'])
def process_step():
    """
    Simulate the next run in the current job.

    Returns:
        JSON with step result and progress information
    """
    global current_job

    if not current_job:
        return jsonify({'error': 'No active job'}), 400

    if current_job['completed']:
        return jsonify({'error': 'Job already completed'}), 400

    idx = current_job['current_index']
    runs = current_job['runs']

    # Process this run
    result = RunProcessor(runs[idx]).process()
    vector = None
    if result['success']:
        vector = assemble(result['trace'], current_job['settings'].features).values
    current_job['results'].append(summarize(result))
    current_job['features'].append(vector)
    current_job['current_index'] += 1

    # Check if completed
    completed = current_job['current_index'] >= len(runs)
    if completed:
        current_job['completed'] = True

    return jsonify({
        'completed': completed,
        'total': len(runs),
        'processed': current_job['current_index'],
        'result': summarize(result)
    })


@jobs_bp.route('/download')
def download_csv():
    """Download the job's feature matrix as a CSV file."""
    if not current_job or not current_job['results']:
        return "No results to download", 400

    csv_content = generate_csv(current_job)

    return Response(
        csv_content,
        mimetype='text/csv',
        headers={
            'Content-Disposition': f'attachment; filename=etroll_features_{datetime.now().strftime("%Y%m%d_%H%M%S")}.csv'
        }
    )


@jobs_bp.route('/reset', methods=['POST'])
def reset_job():
    """Clear the current job."""
    global current_job
    current_job = None
    return jsonify({'message': 'Job reset successfully'})
