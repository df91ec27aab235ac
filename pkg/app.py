"""
Flask application for the E-TRoll rolling-gripper simulator.

Serves dataset jobs (/start, /step, /download) and the palm analysis API.
Run settings come from the YAML file named by $ETROLL_CONFIG, if set.
"""

import logging
import os
from flask import Flask
from routes.jobs import jobs_bp
from routes.analysis import analysis_bp


app = Flask(__name__)

# Register blueprints
app.register_blueprint(jobs_bp)
app.register_blueprint(analysis_bp)


if __name__ == '__main__':
    logging.basicConfig(
        level=os.environ.get('LOG_LEVEL', 'INFO').upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    host = os.environ.get('FLASK_HOST', '127.0.0.1')
    port = int(os.environ.get('FLASK_PORT', 5001))
    debug = os.environ.get('FLASK_DEBUG', 'false').lower() == 'true'
    app.run(debug=debug, host=host, port=port)
