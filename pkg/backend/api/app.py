# pip install -r requirements.txt
# gunicorn app:app

from flask import Flask, request, jsonify
from dotenv import load_dotenv

import bounds
import settings
from bounds import BoundInputs

load_dotenv()

app = Flask(__name__)


def _read_json():
    data = request.get_json(silent=True)
    if data is None:
        app.logger.error(f"Failed to parse JSON, Content-Type: {request.content_type}")
        return None
    if not isinstance(data, dict):
        app.logger.error("Request body is not a JSON object")
        return None
    return data


# Health route
@app.route('/')
def health():
    return jsonify({'status': 'ok', 'version': settings.VERSION})

@app.route('/bounds', methods=['POST'])
def bounds_route():
    data = _read_json()
    if data is None:
        return jsonify({'error': 'Invalid JSON in request body'}), 400

    try:
        inputs = BoundInputs.from_dict(data)
        reports = bounds.all_reports(inputs)
    except (TypeError, ValueError) as exc:
        app.logger.error(f"Rejected bound inputs: {exc}")
        return jsonify({'error': str(exc)}), 400
    except Exception as exc:
        app.logger.exception("Bound evaluation failed", exc_info=exc)
        return jsonify({'error': 'Bound evaluation failed'}), 500

    return jsonify(reports)

@app.route('/design_rule', methods=['POST'])
def design_rule_route():
    data = _read_json()
    if data is None:
        return jsonify({'error': 'Invalid JSON in request body'}), 400

    missing = [key for key in ('lambda', 'T', 'm', 'B0') if key not in data]
    if missing:
        return jsonify({'error': f"Missing fields: {', '.join(missing)}"}), 400

    try:
        lam, T, m, B0 = float(data['lambda']), float(data['T']), int(data['m']), float(data['B0'])
        max_B = bounds.design_rule_max_B(lam, T, m, B0)
        depth = int(data.get('depth', 10))
        sequence = bounds.g_sequence_simplified(B0, max_B, lam, m, T, depth)
    except (TypeError, ValueError) as exc:
        app.logger.error(f"Rejected design rule inputs: {exc}")
        return jsonify({'error': str(exc)}), 400
    except Exception as exc:
        app.logger.exception("Design rule failed", exc_info=exc)
        return jsonify({'error': 'Design rule failed'}), 500

    return jsonify({'max_B': max_B, 'g_sequence': sequence})

@app.route('/expected_T', methods=['POST'])
def expected_T_route():
    data = _read_json()
    if data is None:
        return jsonify({'error': 'Invalid JSON in request body'}), 400

    try:
        result = bounds.expected_T_lower_bound(BoundInputs.from_dict(data))
    except (TypeError, ValueError) as exc:
        app.logger.error(f"Rejected expected-T inputs: {exc}")
        return jsonify({'error': str(exc)}), 400
    except Exception as exc:
        app.logger.exception("Expected-T bound failed", exc_info=exc)
        return jsonify({'error': 'Expected-T bound failed'}), 500

    return jsonify({
        'values': result.values,
        'b_sequence': result.b_sequence,
        'thresholds': result.thresholds,
        'meaningful': result.meaningful,
        'annihilated_from': result.annihilated_from,
    })

if __name__ == '__main__':
    settings.configure_logging()
    app.run(debug=settings.FLASK_DEBUG, port=settings.PORT)
